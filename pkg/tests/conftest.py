"""Shared fixtures: tiny float64 configs, a toy diffusion process, molecule files."""

import numpy as np
import pytest

from molguide.core.diffusion import (
    Marginals,
    NoiseSchedule,
    StateSpace,
    build_transitions,
)
from molguide.utils.config import ModelConfig, RunConfig

# Small molecules, all below the 250-350 Da filter window.
DRUGLIKE_SMILES = [
    "CC(=O)Nc1ccc(O)cc1",                      # paracetamol, 151 Da
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",            # caffeine, 194 Da
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",              # ibuprofen, 206 Da
    "OC(=O)c1ccccc1OC(C)=O",                   # aspirin
    "c1ccc2ccccc2c1",                          # naphthalene
    "c1ccc2[nH]ccc2c1",                        # indole
    "CCN(CC)CC",
    "OCC1OC(O)C(O)C(O)C1O",
    "Clc1ccc(Cl)cc1",
    "CS(=O)(=O)N",
    "O=C1CCCN1",
    "C1CC1C#N",
]

IN_WINDOW_SMILES = [
    "Cc1cc(NS(=O)(=O)c2ccc(N)cc2)no1",           # sulfamethoxazole, 253 Da
    "CC(C)NCC(O)COc1cccc2ccccc12",               # propranolol, 259 Da
    "CN(C)CCCN1c2ccccc2CCc2ccccc21",             # imipramine, 280 Da
]


@pytest.fixture
def tiny_config() -> RunConfig:
    """A RunConfig small enough to train in a few seconds (float64 for exact tests)."""
    return RunConfig(
        seed=7,
        diffusion_steps=5,
        model=ModelConfig(n_layers=1, hidden_node=8, hidden_edge=4, hidden_global=4, n_heads=2),
        dtype="float64",
        batch_size=4,
        train_steps=3,
        log_every=1,
        checkpoint_every=2,
        max_nodes=12,
        held_out_fraction=0.25,
        apply_filter=False,
    )


@pytest.fixture
def toy_model():
    """Diffusion process over the full state space with full-support marginals."""
    space = StateSpace()
    nodes = np.array([0.5, 0.15, 0.15, 0.05, 0.05, 0.05, 0.05])
    edges = np.array([0.6, 0.2, 0.1, 0.05, 0.05])
    return build_transitions(NoiseSchedule.cosine(5), Marginals(nodes, edges), space)


@pytest.fixture
def smiles_file(tmp_path):
    path = tmp_path / "mols.smi"
    path.write_text("# toy set\n" + "\n".join(DRUGLIKE_SMILES) + "\n", encoding="utf-8")
    return path

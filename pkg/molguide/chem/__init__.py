"""Chemistry modules: molecular graphs, SMILES, rings, fingerprints, similarity."""

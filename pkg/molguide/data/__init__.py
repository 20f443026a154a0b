"""Dataset ingestion, filtering and generation-quality metrics."""

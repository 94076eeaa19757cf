"""Dataset construction pipelines: chunking, extraction, synthesis, training
sample formatting, and corpus statistics."""

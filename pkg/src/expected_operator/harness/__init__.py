"""Error-versus-nnz experiments and rate reports."""

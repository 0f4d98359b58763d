# Embedding quality metrics and statistical tests

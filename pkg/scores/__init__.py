# Per-point reliability scores and perplexity selection

# Dataset generation, ingestion and preprocessing

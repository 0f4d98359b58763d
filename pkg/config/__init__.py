# Configuration management for nescope

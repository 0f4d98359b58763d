# Numerical core: affinities, t-SNE, leave-one-out machinery

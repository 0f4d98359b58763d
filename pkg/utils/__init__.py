# Runtime constants and system resource helpers

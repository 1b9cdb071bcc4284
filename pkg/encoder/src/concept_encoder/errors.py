class EncoderError(Exception):
    """Bad input file, unusable model id, or a backend that failed to load."""

"""hdmpc CLI command groups."""

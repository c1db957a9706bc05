"""ssrlint: static detection of staking-reward defects in Solidity contracts."""

__version__ = "0.1.0"

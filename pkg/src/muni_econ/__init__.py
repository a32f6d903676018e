"""Municipal bond market analytics: trade cleaning, spreads, liquidity, matching and fixed-effects panels."""

__version__ = "0.1.0"

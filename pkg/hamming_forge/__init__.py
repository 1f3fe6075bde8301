"""
Hamming Forge - exact Hamming-space set-family toolkit and shift analysis of monotone CLIQUE circuits
"""

__version__ = "1.0.0"
TOOL_NAME = "hamming-forge"

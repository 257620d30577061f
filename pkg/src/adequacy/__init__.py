"""Resource adequacy assessment and ELCC accreditation with risk-minimizing dispatch."""

__version__ = "0.1.0"

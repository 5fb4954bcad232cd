from .expr import Expression, parse_expr, to_source, FUNCTIONS
from .fields import (
    AnalyticField,
    CallableField,
    Field,
    FiniteDiffScheme,
    GridField,
    curl_residual,
    divergence,
    gradient,
    jacobian,
    partial,
)
from .gridfile import read_grid, write_grid, encode_grid, decode_grid

__all__ = [
    "AnalyticField", "CallableField", "Expression", "FUNCTIONS", "Field",
    "FiniteDiffScheme", "GridField", "curl_residual", "decode_grid",
    "divergence", "encode_grid", "gradient", "jacobian", "parse_expr",
    "partial", "read_grid", "to_source", "write_grid",
]

from . import tensor as ops
from .aent import AentFormatError, decode_aent, encode_aent, read_aent, write_aent
from .gradcheck import GradcheckReport, gradcheck, numeric_grad, relative_error
from .rng import SplitMix64
from .tensor import Tensor, backward, cosine, gmp_rows, make_op, matmul, no_grad, softmax

__all__ = [
    "AentFormatError",
    "GradcheckReport",
    "SplitMix64",
    "Tensor",
    "backward",
    "cosine",
    "decode_aent",
    "encode_aent",
    "gmp_rows",
    "gradcheck",
    "make_op",
    "matmul",
    "no_grad",
    "numeric_grad",
    "ops",
    "read_aent",
    "relative_error",
    "softmax",
    "write_aent",
]

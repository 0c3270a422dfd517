"""Joint design of convolutional encoders and binary labelings for TCM."""

from .constellations import Constellation, by_name, intra_distances, mpam, mpsk
from .encoder import EncoderSpec, enumerate_encoders, encode, is_noncatastrophic
from .gf2 import BitMatrix, rce_factorize
from .labelings import Labeling, brgc, class_representative, mflsa, nbc
from .spectrum import DistanceSpectrum, TcmEncoder, distance_spectrum, is_superior

__version__ = "0.1.0"

__all__ = [
    "BitMatrix",
    "Constellation",
    "DistanceSpectrum",
    "EncoderSpec",
    "Labeling",
    "TcmEncoder",
    "brgc",
    "by_name",
    "class_representative",
    "distance_spectrum",
    "encode",
    "enumerate_encoders",
    "intra_distances",
    "is_noncatastrophic",
    "is_superior",
    "mflsa",
    "mpam",
    "mpsk",
    "nbc",
    "rce_factorize",
]

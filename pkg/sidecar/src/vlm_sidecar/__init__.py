"""HTTP sidecar serving a vision-language encoder over the wire protocol."""

from .encoders import Blip2Encoder, HashedEncoder, load_encoder
from .server import SidecarServer

__version__ = "0.1.0"

__all__ = ["Blip2Encoder", "HashedEncoder", "SidecarServer", "load_encoder", "__version__"]

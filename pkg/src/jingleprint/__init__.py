"""Spatio-temporal visual signatures for finding TV programme jingles in frame streams."""

__version__ = "0.1.0"

from .catalogue import Catalogue, CatalogueEntry, load_catalogue, save_catalogue
from .frameio import GrayFrame, open_frame_source
from .identifier import Detection, ScanConfig, scan_stream, write_report
from .signature import DescriptorParams, frame_signature, sign_segment

__all__ = [
    "Catalogue", "CatalogueEntry", "DescriptorParams", "Detection", "GrayFrame",
    "ScanConfig", "frame_signature", "load_catalogue", "open_frame_source",
    "save_catalogue", "scan_stream", "sign_segment", "write_report",
]

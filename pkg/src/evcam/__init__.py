"""evcam: paired exposure-image and event-frame synthesis from single
images, with reference LIF spiking dynamics and RGB-Event fusion math."""

from .errors import ConfigError, FormatError, LayoutError, ShapeError
from .eventgen import (
    EventFrame,
    EventGenConfig,
    GradientField,
    constant_code,
    delta_l,
    load_evtf,
    save_event_csv,
    save_event_png,
    save_evtf,
    sobel,
    synthesize_events,
    threshold_events,
)
from .flow import FlowConfig, FlowField, generate_flow
from .imaging import (
    ExposureConfig,
    apply_exposure,
    hsv_to_rgb,
    load_png,
    luminance,
    resize,
    rgb_to_hsv,
    save_png,
)
from .pipeline import DatasetJob, discover, per_image_seed, run_job
from .snn import LifParams, LifState, lif_run, lif_step

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "FormatError", "LayoutError", "ShapeError",
    "EventFrame", "EventGenConfig", "GradientField",
    "constant_code", "delta_l", "load_evtf", "save_event_csv",
    "save_event_png", "save_evtf", "sobel", "synthesize_events",
    "threshold_events",
    "FlowConfig", "FlowField", "generate_flow",
    "ExposureConfig", "apply_exposure", "hsv_to_rgb", "load_png",
    "luminance", "resize", "rgb_to_hsv", "save_png",
    "DatasetJob", "discover", "per_image_seed", "run_job",
    "LifParams", "LifState", "lif_run", "lif_step",
    "__version__",
]

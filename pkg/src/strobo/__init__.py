"""Stroboscopic composites from fixed-camera video via a per-pixel Gaussian mixture background."""
from .background import BackgroundModel, ModelParams, init_model
from .compose import StrobeSelection, StrobeSelector, composite, select_frames_greedy, tune_spacing_for_count
from .frame_io import Frame, VideoHeader, downscale_box, read_image, write_image, yuv_to_rgb
from .masks import ForegroundSegmenter, otsu_threshold
from .moments import BlobStats, blob_stats, compute_moments
from .pipeline import PipelineConfig, run_strobe_pipeline
from .synth import SceneSpec, ground_truth_mask, render_frame

__version__ = "0.1.0"

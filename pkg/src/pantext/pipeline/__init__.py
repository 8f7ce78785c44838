"""Image ingestion, inference, ground truth, evaluation and configuration."""

from pantext.pipeline.config import PipelineConfig, dump_config, load_config, parse_config
from pantext.pipeline.evaluate import EvalReport, evaluate, f_measure
from pantext.pipeline.gt import GtItem, gt_key, parse_ctw_gt, parse_icdar_gt
from pantext.pipeline.image import ImageInput, decode_ppm, encode_ppm, load_image, prepare_image
from pantext.pipeline.infer import (Detection, InferenceTrace, detections_from_json, detections_to_json,
                                    infer)

__all__ = [
    "Detection", "EvalReport", "GtItem", "ImageInput", "InferenceTrace", "PipelineConfig",
    "decode_ppm", "detections_from_json", "detections_to_json", "dump_config", "encode_ppm",
    "evaluate", "f_measure", "gt_key", "infer", "load_config", "load_image", "parse_config",
    "parse_ctw_gt", "parse_icdar_gt", "prepare_image",
]

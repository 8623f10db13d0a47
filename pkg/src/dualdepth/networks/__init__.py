"""Raster networks: generators, discriminators, pipeline, and training."""

from dualdepth.networks.patchdisc import PatchDiscConfig, PatchDiscriminator
from dualdepth.networks.pipeline import (
    GAN_CONDITIONS,
    GENERATOR_CHANNELS,
    NetworkBundle,
    PipelineOutput,
    RectifiedInput,
    crop_to_square,
    forward_pipeline,
    normalized_depth,
    rectify,
    reference_depth,
)
from dualdepth.networks.training import (
    Adam,
    PreparedSample,
    TrainConfig,
    evaluate,
    prepare_sample,
    train,
)
from dualdepth.networks.unet import UNet, UNetConfig

__all__ = [
    "Adam",
    "GAN_CONDITIONS",
    "GENERATOR_CHANNELS",
    "NetworkBundle",
    "PatchDiscConfig",
    "PatchDiscriminator",
    "PipelineOutput",
    "PreparedSample",
    "RectifiedInput",
    "TrainConfig",
    "UNet",
    "UNetConfig",
    "crop_to_square",
    "evaluate",
    "forward_pipeline",
    "normalized_depth",
    "prepare_sample",
    "rectify",
    "reference_depth",
    "train",
]

"""Procedural figure rendering and dataset generation."""

from dualdepth.synth.body import BodySpec, Capsule, generate_body, half_thickness_field
from dualdepth.synth.render import BodyAppearance, RenderedSample, render_sample, sample_appearance
from dualdepth.synth.dataset import (
    DatasetManifest,
    DatasetSample,
    load_manifest,
    load_sample_arrays,
    make_dataset,
    prepare_split,
)

__all__ = [
    "BodyAppearance",
    "BodySpec",
    "Capsule",
    "DatasetManifest",
    "DatasetSample",
    "RenderedSample",
    "generate_body",
    "half_thickness_field",
    "load_manifest",
    "load_sample_arrays",
    "make_dataset",
    "prepare_split",
    "render_sample",
    "sample_appearance",
]

from .io import (
    DatasetManifest,
    ManifestEntry,
    load_manifest,
    load_pgm,
    load_pts,
    save_manifest,
    save_pgm,
    save_pts,
)
from .pipeline import (
    PipelineConfig,
    PipelineSample,
    load_dataset,
    run_pipeline,
    samples_from_synth,
)
from .report import (
    PoseResult,
    Report,
    emit_report,
    render_csv,
    render_text,
    report_from_dict,
    report_to_dict,
)
from .split import split_grouped
from .synth import SynthConfig, SynthDataset, SynthSample, landmarks_at, synth_generate

__all__ = [
    "DatasetManifest", "ManifestEntry", "PipelineConfig", "PipelineSample",
    "PoseResult", "Report", "SynthConfig", "SynthDataset", "SynthSample",
    "emit_report", "landmarks_at", "load_dataset", "load_manifest", "load_pgm",
    "load_pts", "render_csv", "render_text", "report_from_dict",
    "report_to_dict", "run_pipeline", "samples_from_synth", "save_manifest",
    "save_pgm", "save_pts", "split_grouped", "synth_generate",
]

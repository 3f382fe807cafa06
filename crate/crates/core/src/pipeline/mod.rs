//! Configuration, end-to-end runs, live mode and plot data.

mod config;
mod experiment;
mod live;
mod plotdata;
mod run;

pub use config::{
    ActionConfig, ClassifierConfig, FilterConfig, LiveConfig, MdtwConfig, PipelineConfig,
    SsaConfig, TemplateSource, DEFAULT_SSA_RANK,
};
pub use experiment::{featurize, train_model, ModelBundle, MODEL_FORMAT, MODEL_VERSION};
pub use live::{run_live, LiveEvent, LiveOutcome, LiveSession};
pub use plotdata::{write_plotdata, PLOTDATA_FORMAT, PLOTDATA_VERSION};
pub use run::{
    label_recording, preprocess, run_pipeline, segment_recording, ActionFailure, ActionReport,
    ActionSegments, ActionTrace, PipelineOutput, PipelineReport, Segmentation, SegmentsFile, Stage,
    SEGMENTS_FORMAT, SEGMENTS_VERSION,
};

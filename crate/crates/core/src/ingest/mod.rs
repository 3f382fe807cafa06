//! Recording files, angle datagrams, stream merging and synthetic recordings.

mod merge;
mod packet;
mod recording;
mod synth;

pub use merge::{merge_streams, Alignment, MergeOptions, MergeOutput, StreamMerger};
pub use packet::{decode_angle_packet, encode_angle_packet, DecodedPacket, PacketStats};
pub use recording::{
    MergedRecording, MergedRow, ANGLE_CHANNELS, CHANNEL_NAMES, ELBOW_CHANNEL, EMG_CHANNELS,
    MERGED_RATE_HZ,
};
pub use synth::{
    generate_synthetic, read_ground_truth, read_ground_truth_path, write_ground_truth,
    write_ground_truth_path, ActionProfile, GroundTruthEntry, SynthConfig, SyntheticGroundTruth,
};

pub mod dedup;
pub mod fees;
pub mod ingest;
pub mod match_cmd;
pub mod price;
pub mod profile;
pub mod regress;
pub mod report_cmd;
pub mod sweep;
pub mod synth;

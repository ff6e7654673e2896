use std::path::{Path, PathBuf};

use jackson_core::fixtures;
use jackson_core::model::{load_model, PartitionFile};

fn path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn model_files_match_builtin_fixtures() {
    assert_eq!(load_model(&path("five_queue.json")).unwrap(), fixtures::five_queue());
    assert_eq!(load_model(&path("twelve_queue.json")).unwrap(), fixtures::twelve_queue());
    let single = load_model(&path("five_queue_single_entry.json")).unwrap();
    assert_eq!(single.routing(), fixtures::five_queue().routing());
    assert_eq!(single.exo_rates(), &[5.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn partition_files_match_builtin_fixtures() {
    let p = PartitionFile::load(&path("five_queue_partition.json")).unwrap();
    assert_eq!(p, PartitionFile::from_partition(&fixtures::five_queue_partition()));
    let p = PartitionFile::load(&path("twelve_queue_partition.json")).unwrap();
    assert_eq!(p, PartitionFile::from_partition(&fixtures::twelve_queue_partition()));
}

#[test]
fn single_queue_file_is_stable() {
    let m = load_model(&path("mm1.json")).unwrap();
    assert_eq!(m.num_queues(), 1);
    assert!(m.exo_rates()[0] < m.service_rates()[0]);
}

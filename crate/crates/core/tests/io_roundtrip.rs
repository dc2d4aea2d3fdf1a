use choiforge::channel::kraus_to_choi;
use choiforge::datagen::{random_pair_sample, random_s_matrix, random_tp_channel, Rng};
use choiforge::fidelity::{read_sample_jsonl, write_sample_jsonl, FidelityDocument};
use choiforge::sdp::{import_interchange, write_interchange, SdpProblem};
use choiforge::{ChoiMatrix64, ConstraintKind, FidelityTensor64, KrausSet64, MappingSample64};

#[test]
fn kraus_and_choi_json_are_lossless() {
    for seed in 0..10 {
        let ch = random_tp_channel::<f64>(3, 2, 4, &mut Rng::new(seed)).unwrap();
        let back = KrausSet64::from_json(&ch.to_json().unwrap()).unwrap();
        assert_eq!(back, ch);
        let choi = kraus_to_choi(&ch);
        assert_eq!(ChoiMatrix64::from_json(&choi.to_json().unwrap()).unwrap(), choi);
    }
}

#[test]
fn choi_json_rejects_wrong_length() {
    let choi = kraus_to_choi(&random_tp_channel::<f64>(2, 2, 2, &mut Rng::new(1)).unwrap());
    let mut v: serde_json::Value = serde_json::from_str(&choi.to_json().unwrap()).unwrap();
    v["j"].as_array_mut().unwrap().pop();
    assert!(ChoiMatrix64::from_json(&v.to_string()).is_err());
}

#[test]
fn fidelity_document_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = random_s_matrix::<f64>(3, 4, &mut Rng::new(7));
    let path = dir.path().join("s.json");
    FidelityDocument::from(&s).write_json(&path).unwrap();
    let back: FidelityTensor64 = FidelityDocument::read_json(&path).unwrap().to_tensor().unwrap();
    assert_eq!(back, s);
}

#[test]
fn sample_jsonl_round_trip() {
    let sample = random_pair_sample::<f64>(3, 2, 30, &mut Rng::new(5)).unwrap();
    let mut buf = Vec::new();
    write_sample_jsonl(&sample, &mut buf).unwrap();
    let back: MappingSample64 = read_sample_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back.records(), sample.records());
    assert_eq!((back.n(), back.d()), (3, 2));
}

#[test]
fn interchange_round_trip_keeps_the_problem() {
    let s = random_s_matrix::<f64>(2, 3, &mut Rng::new(2));
    let p = SdpProblem::with_kind(s, ConstraintKind::TracePreserving).unwrap();
    let mut buf = Vec::new();
    write_interchange(&p, &mut buf).unwrap();
    let q = import_interchange::<f64, _>(buf.as_slice(), 2, 3).unwrap();
    assert_eq!(q.num_constraints(), p.num_constraints());
    assert!(q.objective().matrix().max_abs_diff(p.objective().matrix()) <= 1e-15);
}

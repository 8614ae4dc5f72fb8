use super::*;
use crate::autodiff::stable_sigmoid;

fn sizes(users: usize, items: usize, entities: usize, relations: usize) -> ModelSizes {
    ModelSizes {
        users,
        items,
        entities,
        relations,
    }
}

fn hp(l: usize, d: usize, variant: Variant) -> HyperParams {
    HyperParams {
        low_layers: l,
        dim: d,
        variant,
        ..Default::default()
    }
}

fn set(model: &mut MkrModel<f64>, name: &str, shape: &[usize], data: &[f64]) {
    let id = model.params().id(name).unwrap();
    model
        .params_mut()
        .set(id, Tensor::from_f64(shape, data).unwrap())
        .unwrap();
}

fn zero_all(model: &mut MkrModel<f64>) {
    let ids: Vec<ParamId> = model.params().ids().collect();
    for id in ids {
        let shape = model.params().value(id).shape().to_vec();
        model.params_mut().set(id, Tensor::zeros(&shape)).unwrap();
    }
}

/// item 0 → {0}, item 1 → {1, 2}; entity 3 is graph-only.
fn toy_alignment() -> Alignment {
    Alignment::from_pairs(2, 4, &[(0, 0), (1, 1), (1, 2)]).unwrap()
}

#[test]
fn zero_parameters_give_half() {
    let mut m = MkrModel::<f64>::new(hp(2, 3, Variant::Full), sizes(2, 2, 4, 2), 1).unwrap();
    zero_all(&mut m);
    let a = toy_alignment();
    assert_eq!(m.rs_forward(&a, 1, 1, 2).unwrap(), 0.5);
    assert_eq!(m.rs_forward_eval(&a, 0, 0).unwrap(), 0.5);
    let (t_hat, score) = m.kge_forward(&a, 3, 1, None, 0).unwrap();
    assert!(t_hat.iter().all(|&x| x == 0.0));
    assert_eq!(score, 0.5);
}

/// Hand-set d = 1, L = K = 1 model.
fn scalar_model() -> MkrModel<f64> {
    let mut m = MkrModel::<f64>::new(hp(1, 1, Variant::Full), sizes(1, 1, 2, 1), 0).unwrap();
    set(&mut m, "user_emb", &[1, 1], &[0.7]);
    set(&mut m, "item_emb", &[1, 1], &[-0.4]);
    set(&mut m, "entity_emb", &[2, 1], &[1.3, 0.9]);
    set(&mut m, "relation_emb", &[1, 1], &[0.5]);
    set(&mut m, "user_mlp.0.weight", &[1, 1], &[1.5]);
    set(&mut m, "user_mlp.0.bias", &[1], &[0.1]);
    set(&mut m, "cc.0.w_vv", &[1], &[0.3]);
    set(&mut m, "cc.0.w_ev", &[1], &[-0.8]);
    set(&mut m, "cc.0.w_ve", &[1], &[0.6]);
    set(&mut m, "cc.0.w_ee", &[1], &[0.2]);
    set(&mut m, "cc.0.b_v", &[1], &[0.05]);
    set(&mut m, "cc.0.b_e", &[1], &[-0.1]);
    set(&mut m, "relation_mlp.0.weight", &[1, 1], &[2.0]);
    set(&mut m, "relation_mlp.0.bias", &[1], &[-0.2]);
    set(&mut m, "kge_head.0.weight", &[1, 2], &[0.9, -1.1]);
    set(&mut m, "kge_head.0.bias", &[1], &[0.3]);
    m
}

#[test]
fn scalar_oracle_rs() {
    let m = scalar_model();
    let a = Alignment::from_pairs(1, 2, &[(0, 0)]).unwrap();
    let (u, v, e) = (0.7, -0.4, 1.3);
    let u1 = f64::max(1.5 * u + 0.1, 0.0);
    let v1 = v * e * 0.3 + e * v * -0.8 + 0.05;
    let expected = 1.0 / (1.0 + (-(u1 * v1)).exp());
    let got = m.rs_forward(&a, 0, 0, 0).unwrap();
    assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    assert!(got > 0.0 && got < 1.0);
}

#[test]
fn scalar_oracle_kge() {
    let m = scalar_model();
    let a = Alignment::from_pairs(1, 2, &[(0, 0)]).unwrap();
    let (v, h, r, t) = (-0.4, 1.3, 0.5, 0.9);
    let h1 = v * h * 0.6 + h * v * 0.2 - 0.1;
    let r1 = f64::max(2.0 * r - 0.2, 0.0);
    let t_hat = 0.9 * h1 - 1.1 * r1 + 0.3;
    let (pred, score) = m.kge_forward(&a, 0, 0, Some(0), 1).unwrap();
    assert!((pred[0] - t_hat).abs() < 1e-15);
    assert!((score - 1.0 / (1.0 + (-(t * t_hat)).exp())).abs() < 1e-15);
    // an aligned head needs its item; a foreign item is rejected
    assert!(m.kge_forward(&a, 0, 0, None, 1).is_err());
    assert!(matches!(m.kge_forward(&a, 1, 0, Some(0), 1), Err(MkrError::Contract(_))));
}

#[test]
fn unit_tail_scores_sigmoid_one() {
    // only the tail predictor's bias is non-zero, so t̂ = bias
    let mut m = MkrModel::<f64>::new(hp(1, 2, Variant::Full), sizes(1, 1, 3, 1), 0).unwrap();
    zero_all(&mut m);
    set(&mut m, "kge_head.0.bias", &[2], &[1.0, 0.0]);
    set(&mut m, "entity_emb", &[3, 2], &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let a = Alignment::from_pairs(1, 3, &[(0, 0)]).unwrap();
    let (_, s) = m.kge_forward(&a, 2, 0, None, 1).unwrap();
    assert!((s - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    let (_, s) = m.kge_forward(&a, 2, 0, None, 2).unwrap();
    assert_eq!(s, 0.5);
}

#[test]
fn eval_with_single_entity_matches_sampled() {
    let m = MkrModel::<f64>::new(hp(2, 4, Variant::Full), sizes(3, 2, 4, 2), 5).unwrap();
    let a = toy_alignment();
    for u in 0..3 {
        assert_eq!(m.rs_forward_eval(&a, u, 0).unwrap(), m.rs_forward(&a, u, 0, 0).unwrap());
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[test]
fn eval_averages_logits_over_entities() {
    // inner-product head is linear in v_L, so the mean v_L gives the mean logit
    let m = MkrModel::<f64>::new(hp(1, 4, Variant::Full), sizes(2, 2, 4, 1), 9).unwrap();
    let a = toy_alignment();
    for u in 0..2 {
        let one = logit(m.rs_forward(&a, u, 1, 1).unwrap());
        let two = logit(m.rs_forward(&a, u, 1, 2).unwrap());
        let both = logit(m.rs_forward_eval(&a, u, 1).unwrap());
        assert!((both - 0.5 * (one + two)).abs() < 1e-10);
    }
    let again = m.rs_forward_eval(&a, 0, 1).unwrap();
    assert_eq!(again, m.rs_forward_eval(&a, 0, 1).unwrap());
}

#[test]
fn eval_is_permutation_invariant() {
    let m = MkrModel::<f64>::new(hp(2, 3, Variant::Full), sizes(2, 2, 4, 1), 4).unwrap();
    let a = toy_alignment();
    let b = Alignment::from_pairs(2, 4, &[(1, 2), (0, 0), (1, 1)]).unwrap();
    assert_eq!(m.item_vectors(&a).unwrap(), m.item_vectors(&b).unwrap());
    assert_eq!(m.head_vectors(&a).unwrap(), m.head_vectors(&b).unwrap());
}

#[test]
fn shared_units_feed_both_towers() {
    for variant in [Variant::Full, Variant::Dcn] {
        let mut m = MkrModel::<f64>::new(hp(1, 3, variant), sizes(2, 2, 4, 1), 2).unwrap();
        // keep u_L away from the relu dead zone
        set(&mut m, "user_mlp.0.bias", &[3], &[1.0, 1.0, 1.0]);
        let a = toy_alignment();
        let rs = m.rs_forward(&a, 0, 1, 1).unwrap();
        let kg = m.kge_forward(&a, 1, 0, Some(1), 3).unwrap().1;
        let id = m.params().id("cc.0.w_ev").unwrap();
        m.params_mut().value_mut(id).data_mut()[0] += 0.5;
        let id = m.params().id("cc.0.w_ve").unwrap();
        m.params_mut().value_mut(id).data_mut()[1] += 0.5;
        assert_ne!(rs, m.rs_forward(&a, 0, 1, 1).unwrap());
        assert_ne!(kg, m.kge_forward(&a, 1, 0, Some(1), 3).unwrap().1);
    }
}

#[test]
fn mixed_head_batch_matches_single_rows() {
    let m = MkrModel::<f64>::new(hp(1, 3, Variant::Full), sizes(2, 2, 4, 2), 3).unwrap();
    let a = toy_alignment();
    let heads = [3, 1, 0, 3];
    let items = [None, Some(1), Some(0), None];
    let mut tape = Tape::new();
    let out = m.kg_batch(&mut tape, &heads, &[0, 1, 1, 0], &items, &[0, 2, 3, 1]).unwrap();
    let scores = tape.value(out.scores).data().to_vec();
    for k in 0..4 {
        let (_, s) = m.kge_forward(&a, heads[k], [0, 1, 1, 0][k], items[k], [0, 2, 3, 1][k]).unwrap();
        assert!((s - scores[k]).abs() < 1e-14);
    }
}

#[test]
fn unaligned_item_and_bad_ids_rejected() {
    let m = MkrModel::<f64>::new(hp(1, 2, Variant::Full), sizes(1, 2, 3, 1), 0).unwrap();
    let a = Alignment::from_pairs(2, 3, &[(0, 0)]).unwrap();
    assert!(matches!(m.rs_forward(&a, 0, 1, 1), Err(MkrError::Contract(_))));
    assert!(matches!(m.rs_forward_eval(&a, 0, 1), Err(MkrError::Contract(_))));
    assert!(matches!(m.rs_forward(&a, 0, 0, 2), Err(MkrError::Contract(_))));
    assert!(m.rs_forward(&a, 5, 0, 0).is_err());
}

#[test]
fn mlp_head_and_plain_variant_stay_in_range() {
    for variant in [Variant::Plain, Variant::Stitch, Variant::Dcn] {
        let mut h = hp(2, 4, variant);
        h.rs_head = RsHead::Mlp;
        h.rs_mlp_depth = 2;
        let m = MkrModel::<f64>::new(h, sizes(3, 2, 4, 2), 8).unwrap();
        let a = toy_alignment();
        let pairs = [(0, 0), (1, 1), (2, 1)];
        let batch = m.score_pairs(&a, &pairs).unwrap();
        for (&(u, v), &p) in pairs.iter().zip(&batch) {
            assert!(p > 0.0 && p < 1.0);
            assert_eq!(p, m.rs_forward_eval(&a, u, v).unwrap());
        }
    }
}

#[test]
fn plain_variant_has_no_graph_path() {
    let m = MkrModel::<f64>::new(hp(1, 3, Variant::Plain), sizes(2, 2, 4, 1), 1).unwrap();
    assert!(m.shared_params().is_empty());
    let a = toy_alignment();
    // S(v) is irrelevant to the prediction
    assert_eq!(m.rs_forward(&a, 0, 1, 1).unwrap(), m.rs_forward(&a, 0, 1, 2).unwrap());
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let mut h = hp(2, 3, Variant::Stitch);
    h.kg_weight = 0.1;
    let m = MkrModel::<f64>::new(h, sizes(3, 2, 4, 2), 11).unwrap();
    m.save(&path).unwrap();
    let back = MkrModel::<f64>::load(&path).unwrap();
    assert_eq!(back.hyper(), m.hyper());
    assert_eq!(back.sizes(), m.sizes());
    for id in m.params().ids() {
        assert_eq!(back.params().name(id), m.params().name(id));
        assert_eq!(back.params().value(id), m.params().value(id));
    }

    let mut bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(MkrModel::<f64>::load(&path), Err(MkrError::Checkpoint(_))));
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(MkrModel::<f64>::load(&path), Err(MkrError::Checkpoint(_))));
}

#[test]
fn f32_model_runs() {
    let m = MkrModel::<f32>::new(hp(1, 4, Variant::Full), sizes(2, 2, 4, 1), 1).unwrap();
    let p = m.rs_forward_eval(&toy_alignment(), 1, 1).unwrap();
    assert!(p > 0.0 && p < 1.0);
    assert!(stable_sigmoid(0.0f32) == 0.5);
}

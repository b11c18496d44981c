use coref_core::numerics::{finite_diff_check, Parameters, Rng};
use coref_core::textmodel::{ClusterSet, Document, MentionSpan};
use coref_core::training::{accumulate_document, coref_loss, TrainConfig};
use coref_core::{ModelConfig, ModelParams};

fn partition(n: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let k = rng.range(1, n);
    let mut c = vec![Vec::new(); k];
    for m in 0..n {
        c[rng.range(0, k - 1)].push(m);
    }
    c.into_iter().filter(|c| !c.is_empty()).collect()
}

#[test]
fn full_model_gradients_on_200_random_configurations() {
    let mut rng = Rng::new(41);
    let words: Vec<String> = ["a", "b", "c", "d", "e", "f", "g"].iter().map(|w| w.to_string()).collect();
    for trial in 0..200 {
        let cfg = ModelConfig {
            dim: rng.range(1, 6),
            att_dim: rng.range(1, 6),
            aff_dim: rng.range(1, 6),
            depth: rng.range(0, 3),
            attention: rng.chance(0.75),
        };
        let mut model = ModelParams::new(cfg, words[..5].to_vec(), &mut rng).unwrap();
        // keep pre-activations off the ReLU kink at zero
        for p in model.params_mut().into_iter().filter(|p| p.name.ends_with("bias")) {
            p.value.as_mut_slice().iter_mut().for_each(|b| *b = rng.uniform(-0.5, 0.5));
        }
        let n = rng.range(1, 8);
        let tokens: Vec<String> = (0..n).map(|_| rng.pick(&words).clone()).collect();
        let mut spans = Vec::new();
        for s in 0..n {
            if rng.chance(0.6) {
                spans.push(MentionSpan::new(s, (s + rng.range(0, 2)).min(n - 1)));
            }
        }
        spans.dedup();
        if spans.is_empty() {
            spans.push(MentionSpan::new(0, n - 1));
        }
        let clusters = partition(spans.len(), &mut rng);
        let doc = Document::new(format!("t{trial}"), tokens, spans, clusters).unwrap();
        let gold: ClusterSet = doc.gold_clusters.clone();
        let tc = TrainConfig {
            alpha: rng.uniform(0.2, 3.0),
            beta: rng.uniform(0.2, 3.0),
            ..TrainConfig::default()
        };
        model.zero_grads();
        accumulate_document(&mut model, &doc, &tc, 1.0).unwrap();
        let report = finite_diff_check(
            &mut model,
            |m: &ModelParams| {
                let fwd = m.forward(&doc.tokens, &doc.mentions).unwrap();
                coref_loss(&fwd.affinity.matrix, &gold, tc.alpha, tc.beta).unwrap().loss
            },
            1e-6,
            1e-4,
        );
        assert!(report.passed(), "trial {trial} {cfg:?}: {:?}", report.tensors);
    }
}

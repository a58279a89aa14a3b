//! Scratch probe: poison, persist, reload (degree features recompute), and
//! measure victim damage.

use std::time::Instant;

use emins_core::harness::{run_experiment, TrainConfig};
use emins_core::poison::{error_max_noise, poison_dataset, random_noise, PoisonConfig};
use emins_core::synth::{generate, SynthConfig};
use emins_core::tu::{load_tu_dataset, save_tu_dataset};
use emins_core::{Arch, GraphDataset};

fn env_f64(key: &str, default: f64) -> f64 {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn env_usize(key: &str, default: usize) -> usize {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

/// Round-trips a dataset through the flat-file format, as an unauthorized
/// exploiter would consume it.
fn through_disk(ds: &GraphDataset) -> GraphDataset {
    let dir = tempfile::tempdir().unwrap();
    save_tu_dataset(ds, dir.path()).unwrap();
    load_tu_dataset(dir.path(), &ds.name).unwrap()
}

fn main() {
    let start = Instant::now();
    let config = SynthConfig {
        name: "MUTAG".to_string(),
        label_noise: env_f64("NOISE", 0.1),
        density: env_f64("DENSITY", 1.8),
        hub_degree_min: env_usize("HUB_MIN", 11),
        hub_degree_max: env_usize("HUB_MAX", 13),
        ..Default::default()
    };
    let clean = generate(&config).unwrap();
    let mean_edges: f64 =
        clean.graphs.iter().map(|g| g.edge_count() as f64).sum::<f64>() / clean.len() as f64;

    let mut poison_cfg = PoisonConfig::default();
    if std::env::var("SURROGATE_GIN").is_ok() {
        poison_cfg.model = emins_core::ModelConfig::new(Arch::Gin);
    }
    let (emins, emins_log) = poison_dataset(&clean, &poison_cfg).unwrap();
    let (random, _) = random_noise(&clean, &poison_cfg.budget, poison_cfg.seed).unwrap();

    let clean_disk = through_disk(&clean);
    let emins_disk = through_disk(&emins);
    let random_disk = through_disk(&random);

    let seeds: Vec<u64> = (0..env_usize("SEEDS", 3) as u64).collect();
    let gin = std::env::var("GIN").is_ok();
    let archs: Vec<Arch> = if gin { vec![Arch::Gcn, Arch::Gin] } else { vec![Arch::Gcn] };
    let mut variants = vec![
        ("clean".to_string(), clean_disk.clone()),
        ("eminS".to_string(), emins_disk),
        ("random".to_string(), random_disk),
    ];
    if std::env::var("ERRMAX").is_ok() {
        let (errmax, _) = error_max_noise(&clean, &poison_cfg.budget, &poison_cfg).unwrap();
        variants.push(("errmax".to_string(), through_disk(&errmax)));
    }
    let report =
        run_experiment(&clean_disk, &variants, &archs, &seeds, &TrainConfig::default()).unwrap();
    let mean = |v: &str| report.mean_accuracy(v, Arch::Gcn).unwrap();
    println!(
        "noise={} density={} hub={}..{} |E| {:.1} | flips/graph {:.2} | clean {:.3} emins {:.3} random {:.3} | gap {:+.3} | emins<random {} | {:?}",
        config.label_noise,
        config.density,
        config.hub_degree_min,
        config.hub_degree_max,
        mean_edges,
        emins_log.len() as f64 / clean.len() as f64,
        mean("clean"),
        mean("eminS"),
        mean("random"),
        mean("clean") - mean("eminS"),
        mean("eminS") < mean("random"),
        start.elapsed()
    );
    if gin || std::env::var("ERRMAX").is_ok() {
        println!("{}", report.render_table());
    }

    if std::env::var("DIAG").is_ok() {
        for class in [0usize, 1] {
            let mut max_clean = 0.0;
            let mut max_pois = 0.0;
            let mut conc = 0.0;
            let mut count = 0usize;
            for (g, p) in clean.graphs.iter().zip(emins.graphs.iter()) {
                if g.label() != class {
                    continue;
                }
                count += 1;
                let n = g.node_count();
                max_clean += (0..n).map(|u| g.degree(u)).max().unwrap() as f64;
                max_pois += (0..n).map(|u| p.degree(u)).max().unwrap() as f64;
                // how concentrated are this graph's flips on one node
                let mut incident = vec![0usize; n];
                for u in 0..n {
                    for v in 0..n {
                        if g.has_edge(u, v) != p.has_edge(u, v) {
                            incident[u] += 1;
                        }
                    }
                }
                conc += incident.iter().max().copied().unwrap_or(0) as f64;
            }
            let c = count as f64;
            println!(
                "  class {class}: mean max-degree clean {:.1} -> poisoned {:.1}; max flips on one node {:.1}",
                max_clean / c,
                max_pois / c,
                conc / c
            );
        }
    }
}

//! Prints mean pixel accuracy per scene class and technique, and which technique wins each image.

use std::collections::BTreeMap;

use rayon::prelude::*;
use skymark_core::metrics::confusion;
use skymark_core::synth::{make_corpus, SceneClass};
use skymark_core::technique::{apply_all, Technique, TechniqueId};

fn main() {
    let per_class: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(17);
    let corpus = make_corpus([per_class; 5], seed);
    let scores: Vec<(SceneClass, Vec<f64>)> = corpus
        .par_iter()
        .map(|s| {
            let mut acc: Vec<f64> = apply_all(&s.image, seed)
                .into_iter()
                .map(|m| m.map(|m| confusion(&m, &s.truth).unwrap().accuracy()).unwrap_or(0.0))
                .collect();
            let ff = Technique::SobelFloodFill.apply(&s.image, seed).unwrap();
            acc.push(confusion(&ff, &s.truth).unwrap().accuracy());
            (s.spec.class, acc)
        })
        .collect();

    print!("{:<9}", "class");
    for t in Technique::all() {
        print!("{:>9}", &t.name()[..t.name().len().min(8)]);
    }
    println!();
    let mut at_min = vec![0usize; 13];
    for class in SceneClass::ALL {
        let rows: Vec<&Vec<f64>> = scores.iter().filter(|(c, _)| *c == class).map(|(_, a)| a).collect();
        print!("{:<9}", class.name());
        for i in 0..14 {
            print!("{:>9.4}", rows.iter().map(|a| a[i]).sum::<f64>() / rows.len() as f64);
        }
        println!();
        let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
        for a in &rows {
            let best = a[..13].iter().cloned().fold(f64::MIN, f64::max);
            let first = a[..13].iter().position(|&v| v == best).unwrap();
            *labels.entry(TechniqueId::ALL[first].name()).or_default() += 1;
            for i in 0..13 {
                if a[i] == best {
                    at_min[i] += 1;
                }
            }
        }
        println!("          labels {labels:?}");
    }
    let n = scores.len() as f64;
    print!("at-min share:");
    for (i, c) in at_min.iter().enumerate() {
        print!(" {}={:.2}", TechniqueId::ALL[i].name(), *c as f64 / n);
    }
    println!();
}

use proptest::prelude::*;

use skymark_core::color::{hsl_to_rgb, rgb_to_hsl};
use skymark_core::floodfill::{floodfill_sky, EdgeMask, WORK_SIZE};
use skymark_core::kmeans_hsl::{kmeans_cluster, kmeans_hsl_mask};
use skymark_core::meanshift::{meanshift_mask, meanshift_segment, MeanShiftParams};
use skymark_core::metrics::{confusion, series_stats};
use skymark_core::pipeline::{evaluate, read_results, write_results, ResultRow};
use skymark_core::selector::{FeatureVector, Normalization, FEATURE_LEN};
use skymark_core::sobel_prob::{boundary_energy, BoundaryFn, SobelAnalysis};
use skymark_core::synth::{random_spec, render, SceneClass};
use skymark_core::technique::TechniqueParams;
use skymark_core::{Raster, SkyMask, TechniqueId};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sky over ground with per-pixel jitter, both colors drawn by proptest.
fn two_region() -> impl Strategy<Value = Raster> {
    (4usize..20, 4usize..16, any::<[u8; 3]>(), any::<[u8; 3]>(), any::<u64>(), 0u8..40).prop_map(
        |(w, h, sky, ground, seed, amp)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let horizon = h / 2;
            Raster::from_fn(w, h, |_, y| {
                let base = if y < horizon { sky } else { ground };
                base.map(|c| {
                    let n = if amp > 0 { rand::Rng::random_range(&mut rng, 0..=amp) } else { 0 };
                    c.saturating_add(n)
                })
            })
            .unwrap()
        },
    )
}

fn union_find_fill(edges: &[bool], n: usize) -> Vec<bool> {
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut parent: Vec<usize> = (0..n * n).collect();
    for y in 0..n {
        for x in 0..n {
            let i = y * n + x;
            if edges[i] {
                continue;
            }
            for j in [(x + 1 < n).then(|| i + 1), (y + 1 < n).then(|| i + n)].into_iter().flatten() {
                if !edges[j] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
    }
    let mut top = vec![false; n * n];
    for x in 0..n {
        if !edges[x] {
            let r = find(&mut parent, x);
            top[r] = true;
        }
    }
    (0..n * n).map(|i| !edges[i] && top[find(&mut parent, i)]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hsl_round_trip_within_one(rgb in any::<[u8; 3]>()) {
        let back = hsl_to_rgb(rgb_to_hsl(rgb));
        for c in 0..3 {
            prop_assert!((back[c] as i16 - rgb[c] as i16).abs() <= 1, "{:?} -> {:?}", rgb, back);
        }
    }

    #[test]
    fn sobel_thresholds_nest(img in two_region()) {
        if let Ok(a) = SobelAnalysis::run(&img) {
            let masks: Vec<SkyMask> = TechniqueId::ALL[..6]
                .iter()
                .map(|t| match t.params() {
                    TechniqueParams::Sobel(v) => a.mask(v),
                    _ => unreachable!(),
                })
                .collect();
            for w in masks.windows(2) {
                // designation order runs from the loosest threshold to the strictest
                prop_assert!(w[1].is_subset_of(&w[0]));
            }
        }
    }

    #[test]
    fn energy_mirrors_with_the_image(img in two_region(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..img.width()).map(|_| rand::Rng::random_range(&mut rng, 0..=img.height())).collect();
        let b = BoundaryFn { rows };
        let j = boundary_energy(&img, &b);
        let jm = boundary_energy(&img.flip_horizontal(), &b.mirrored());
        match (j, jm) {
            (Some(j), Some(jm)) => prop_assert!((j - jm).abs() <= 1e-9 * j.abs().max(1.0)),
            (j, jm) => prop_assert_eq!(j.is_some(), jm.is_some()),
        }
    }

    #[test]
    fn meanshift_regions_respect_minimum_size(img in two_region(), r in 1u32..4, range in 3.0f64..9.0, min in 2usize..30) {
        let p = MeanShiftParams::new(r, range, min).unwrap();
        let seg = meanshift_segment(&img, &p);
        if seg.region_count() > 1 {
            prop_assert!(seg.region_sizes.iter().all(|&s| s >= min));
        }
        prop_assert_eq!(seg.region_sizes.iter().sum::<usize>(), img.width() * img.height());
        prop_assert_eq!(meanshift_mask(&img, &p), meanshift_mask(&img, &p));
    }

    #[test]
    fn kmeans_mask_takes_whole_clusters(img in two_region(), seed in any::<u64>(), t in 10usize..13) {
        let TechniqueParams::KMeansHsl(p) = TechniqueId::ALL[t].params() else { unreachable!() };
        let mask = kmeans_hsl_mask(&img, &p, seed).unwrap();
        let c = kmeans_cluster(&img, p.clusters, seed).unwrap();
        for k in 0..c.centroids.len() {
            let members: Vec<bool> = c.labels.iter().zip(mask.bits()).filter(|(l, _)| **l == k).map(|(_, b)| *b).collect();
            prop_assert!(members.iter().all(|&b| b) || members.iter().all(|&b| !b));
        }
        prop_assert_eq!(mask, kmeans_hsl_mask(&img, &p, seed).unwrap());
    }

    #[test]
    fn metrics_ignore_pair_order(pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..40), i in any::<usize>(), j in any::<usize>()) {
        let (p, o): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        let (i, j) = (i % p.len(), j % p.len());
        let (mut ps, mut os) = (p.clone(), o.clone());
        ps.swap(i, j);
        os.swap(i, j);
        let a = series_stats(&p, &o).unwrap();
        let b = series_stats(&ps, &os).unwrap();
        prop_assert!((a.rmse - b.rmse).abs() < 1e-12);
        prop_assert!((a.r2 - b.r2).abs() < 1e-12);
        prop_assert!((a.d - b.d).abs() < 1e-12);
    }

    #[test]
    fn normalization_standardizes(rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, FEATURE_LEN), 2..12)) {
        let fv: Vec<FeatureVector> = rows.into_iter().map(|r| FeatureVector::new(r).unwrap()).collect();
        let refs: Vec<&FeatureVector> = fv.iter().collect();
        let norm = Normalization::fit(&refs);
        let z: Vec<Vec<f64>> = fv.iter().map(|f| norm.apply(f)).collect();
        let n = z.len() as f64;
        for d in (0..FEATURE_LEN).filter(|&d| norm.active[d]) {
            let mean = z.iter().map(|r| r[d]).sum::<f64>() / n;
            let var = z.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn synthetic_truth_is_reproducible(class in 0usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(SceneClass::ALL[class], 40, 30, &mut rng);
        let a = render(&spec).unwrap();
        let b = render(&spec).unwrap();
        prop_assert_eq!(&a.truth, &b.truth);
        prop_assert_eq!(&a.image, &b.image);
    }

    #[test]
    fn eval_depends_only_on_the_results_file(
        confs in proptest::collection::vec((0u64..50, 0u64..50, 0u64..50, 0u64..50, 0usize..3, 0usize..2), 1..20)
    ) {
        let rows: Vec<ResultRow> = confs
            .iter()
            .enumerate()
            .map(|(i, &(tp, fp, tn, fn_, t, s))| {
                let c = skymark_core::metrics::Confusion { tp, fp, tn: tn + 1, fn_ };
                ResultRow::scored(format!("src{s}/img{i}"), ["Sobel_50", "K-mean_6", "Adaptive"][t], &c, 0)
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results(&path, &rows).unwrap();
        prop_assert_eq!(evaluate(&read_results(&path).unwrap()), evaluate(&rows));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flood_fill_matches_component_oracle(seed in any::<u64>(), density in 0.05f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = EdgeMask::from_fn(|_, _| rand::Rng::random_bool(&mut rng, density));
        let sky = floodfill_sky(&edges);
        prop_assert!(sky.bits().iter().zip(edges.bits()).all(|(s, e)| !(*s && *e)));
        prop_assert_eq!(sky.bits(), &union_find_fill(edges.bits(), WORK_SIZE)[..]);
    }

    #[test]
    fn confusion_counts_add_up(w in 1usize..30, h in 1usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = SkyMask::from_fn(w, h, |_, _| rand::Rng::random_bool(&mut rng, 0.5));
        let b = SkyMask::from_fn(w, h, |_, _| rand::Rng::random_bool(&mut rng, 0.5));
        let c = confusion(&a, &b).unwrap();
        prop_assert_eq!(c.total() as usize, w * h);
        prop_assert_eq!((c.tp + c.fp) as usize, a.count());
        prop_assert_eq!((c.tp + c.fn_) as usize, b.count());
    }
}

//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector4};
use proptrack::assign::{solve, CostMatrix};
use proptrack::associate::{
    measure, rsm, AssocConfig, KalmanFilter, ObjectFeatures, SimilarityMode, Tracker,
};
use proptrack::boxprop::{dcf_solve, gaussian_response, BoxPropConfig, BoxTracker, FrameInput, Head};
use proptrack::features::{extract_builtin, l2_normalize_points, prepare_features};
use proptrack::grid::{Grid, Volume};
use proptrack::labelprop::{
    beliefs_to_pose, finalize_mask, masks_to_labels, pose_to_beliefs, propagate, LabelPropagator,
    MemoryBank, PropConfig,
};
use proptrack::metrics::{clear_metrics, idf1, Region, TrackSet};
use proptrack::spectral::{dft2, xcorr_fft, xcorr_spatial};
use proptrack::synth::{render, Rendered, Scenario, SynthObject};
use proptrack::{BBox, FeatureMap, LabelMap, Pose, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

fn brute_force(m: &CostMatrix) -> f64 {
    // permute the longer side's indices over the shorter side
    let (short, long) = (m.rows().min(m.cols()), m.rows().max(m.cols()));
    let cost = |s: usize, l: usize| {
        if m.rows() <= m.cols() {
            m.get(s, l)
        } else {
            m.get(l, s)
        }
    };
    fn go(k: usize, short: usize, long: usize, used: &mut [bool], acc: f64, best: &mut f64, cost: &dyn Fn(usize, usize) -> f64) {
        if k == short {
            *best = best.min(acc);
            return;
        }
        for l in 0..long {
            if !used[l] {
                used[l] = true;
                go(k + 1, short, long, used, acc + cost(k, l), best, cost);
                used[l] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, short, long, &mut vec![false; long], 0.0, &mut best, &cost);
    best
}

fn c1_assignment() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=7));
        let m = CostMatrix::from_fn(r, c, |_, _| f64::from(rng.random_range(0..100u32)));
        let got: f64 = solve(&m).iter().map(|&(i, j)| m.get(i, j)).sum();
        if got != brute_force(&m) {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && secs < 5.0,
        format!("{mismatches} of 1000 non-optimal, {secs:.2} s"),
    )
}

fn random_volume(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Volume {
    let data = (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect();
    Volume::new(h, w, c, data).unwrap()
}

fn c2_spectral() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (sh, sw) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let (th, tw) = (rng.random_range(1..=sh), rng.random_range(1..=sw));
        let c = rng.random_range(1..=8);
        let t = random_volume(&mut rng, th, tw, c);
        let s = random_volume(&mut rng, sh, sw, c);
        let fast = xcorr_fft(&t, &s).unwrap();
        let slow = xcorr_spatial(&t, &s).unwrap();
        worst = worst.max(rel_err(&fast.data, &slow.data));
    }
    let mut parseval = 0.0f64;
    for _ in 0..20 {
        let g = Grid::from_fn(rng.random_range(1..=64), rng.random_range(1..=64), |_, _| {
            rng.random_range(-1.0..1.0)
        });
        let spatial: f64 = g.data.iter().map(|v| v * v).sum();
        let spectral = dft2(&g).energy() / g.data.len() as f64;
        parseval = parseval.max((spatial - spectral).abs() / spatial);
    }
    check(
        worst <= 1e-5 && parseval <= 1e-5,
        format!("xcorr rel err {worst:.2e}, Parseval rel err {parseval:.2e}"),
    )
}

/// Filter taps solving the circular ridge regression by dense algebra.
fn dense_ridge(x: &Grid, y: &Grid, lambda: f64) -> Vec<f64> {
    let (h, w) = (x.height, x.width);
    let n = h * w;
    let a = DMatrix::from_fn(n, n, |row, col| {
        x.get((col / w + row / w) % h, (col % w + row % w) % w)
    });
    let lhs = a.transpose() * &a + DMatrix::identity(n, n) * lambda;
    let rhs = a.transpose() * DVector::from_vec(y.data.clone());
    lhs.lu().solve(&rhs).unwrap().iter().copied().collect()
}

fn c3_dcf() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_volume(&mut rng, 65, 65, 15);
    let y = gaussian_response(65, 65, 6.5);
    let t = dcf_solve(&x, &y, 0.0).unwrap();
    let identity = rel_err(&t.response(&x).unwrap().data, &y.data);

    let xg = Grid::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
    let y8 = gaussian_response(8, 8, 1.0);
    let x8 = Volume::new(8, 8, 1, xg.data.clone()).unwrap();
    let mut dense = 0.0f64;
    for lambda in [1e-4, 1e-2, 1.0] {
        let fourier = &dcf_solve(&x8, &y8, lambda).unwrap().spatial_filter()[0];
        dense = dense.max(rel_err(&fourier.data, &dense_ridge(&xg, &y8, lambda)));
    }
    check(
        identity <= 1e-6 && dense <= 1e-5,
        format!("self-response rel err {identity:.2e}, dense ridge rel err {dense:.2e}"),
    )
}

fn c4_gating() -> Outcome {
    let kf = KalmanFilter::default();
    let cfg = AssocConfig::default();
    let b = BBox::new(120.0, 80.0, 40.0, 90.0).unwrap();
    let mut s = kf.initiate(&measure(&b));
    for k in 1..4 {
        s = kf.predict(&s);
        let moved = BBox::new(120.0 + 3.0 * f64::from(k), 80.0, 40.0, 90.0).unwrap();
        s = kf.update(&s, &measure(&moved)).unwrap();
    }
    let s = kf.predict(&s);
    let (mean, cov) = kf.project(&s);
    let l = cov.cholesky().ok_or("projected covariance is not positive definite")?.l();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let mut inside = 0;
    for _ in 0..n {
        let e = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let z = mean + l * e;
        if kf.mahalanobis(&s, &z).unwrap() <= cfg.gate {
            inside += 1;
        }
    }
    let rate = f64::from(inside) / f64::from(n);
    check(
        (0.93..=0.97).contains(&rate),
        format!("acceptance rate {rate:.4} at gate {}", cfg.gate),
    )
}

fn random_object(rng: &mut ChaCha8Rng, points: usize, channels: usize) -> ObjectFeatures {
    let data = (0..points * channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    ObjectFeatures::new(channels, data, 0).unwrap()
}

fn dense_rsm(tracks: &[ObjectFeatures], dets: &[ObjectFeatures]) -> Vec<Vec<f64>> {
    let stack = |objs: &[ObjectFeatures]| {
        let rows: usize = objs.iter().map(|o| o.len()).sum();
        let data: Vec<f64> = objs.iter().flat_map(|o| o.data().iter().map(|v| f64::from(*v))).collect();
        DMatrix::from_row_slice(rows, objs[0].channels(), &data)
    };
    let softmax_rows = |mut m: DMatrix<f64>| {
        for mut row in m.row_iter_mut() {
            let mx = row.max();
            row.apply(|v| *v = (*v - mx).exp());
            let s = row.sum();
            row /= s;
        }
        m
    };
    let cos = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
        let (nx, ny) = (x.norm(), y.norm());
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            x.dot(y) / (nx * ny)
        }
    };
    let (t, d) = (stack(tracks), stack(dets));
    let fwd = softmax_rows(&t * d.transpose());
    let bwd = softmax_rows(&d * t.transpose());
    let offsets = |objs: &[ObjectFeatures]| {
        let mut at = 0;
        objs.iter()
            .map(|o| {
                at += o.len();
                (at - o.len(), o.len())
            })
            .collect::<Vec<_>>()
    };
    let (to, doff) = (offsets(tracks), offsets(dets));
    to.iter()
        .map(|&(ti, tn)| {
            doff.iter()
                .map(|&(dj, dn)| {
                    let ti_m = t.rows(ti, tn).into_owned();
                    let dj_m = d.rows(dj, dn).into_owned();
                    let t_hat = fwd.view((ti, dj), (tn, dn)) * &dj_m;
                    let d_hat = bwd.view((dj, ti), (dn, tn)) * &ti_m;
                    0.5 * (cos(&ti_m, &t_hat) + cos(&dj_m, &d_hat))
                })
                .collect()
        })
        .collect()
}

fn c5_rsm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tracks: Vec<_> = (0..3).map(|_| random_object(&mut rng, 4, 8)).collect();
    let dets: Vec<_> = (0..3).map(|_| random_object(&mut rng, 4, 8)).collect();
    let got = rsm(&tracks, &dets).unwrap();
    let want = dense_rsm(&tracks, &dets);
    let oracle = got
        .iter()
        .flatten()
        .zip(want.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut single_ok = true;
    for _ in 0..100 {
        let a = random_object(&mut rng, 1, 8);
        let b = random_object(&mut rng, 1, 8);
        let plain = proptrack::associate::cosine(
            a.data().iter().map(|v| f64::from(*v)),
            b.data().iter().map(|v| f64::from(*v)),
        );
        single_ok &= rsm(&[a], &[b]).unwrap()[0][0] == plain;
    }

    let mut out_of_range = 0;
    for _ in 0..10_000 {
        let nt = rng.random_range(1..=3);
        let nd = rng.random_range(1..=3);
        let c = rng.random_range(1..=6);
        let tracks: Vec<_> = (0..nt).map(|_| { let p = rng.random_range(1..=4); random_object(&mut rng, p, c) }).collect();
        let dets: Vec<_> = (0..nd).map(|_| { let p = rng.random_range(1..=4); random_object(&mut rng, p, c) }).collect();
        out_of_range += rsm(&tracks, &dets)
            .unwrap()
            .iter()
            .flatten()
            .filter(|v| !(-1.0..=1.0).contains(*v))
            .count();
    }
    check(
        oracle <= 1e-6 && single_ok && out_of_range == 0,
        format!(
            "dense oracle err {oracle:.2e}, single-point exact {single_ok}, {out_of_range} values outside [-1, 1] over 1e4 instances"
        ),
    )
}

fn c6_propagation() -> Outcome {
    // the object sits on cell boundaries so the mask is representable
    let sc = Scenario::new(6, 1, 192, 144).with_object(SynthObject::new(
        [200, 60, 60],
        (64.0, 48.0),
        (80.0, 64.0),
        (0.0, 0.0),
    ));
    let r = render(&sc).unwrap();
    let frame = &r.frames[0];
    let raw = extract_builtin(frame, 8).unwrap();
    let mask = r.labels[0].mask(1);
    let (gh, gw) = (raw.height(), raw.width());

    let labels = masks_to_labels(std::slice::from_ref(&mask), gh, gw, 8).unwrap();
    let mut prop = LabelPropagator::new(PropConfig::default()).unwrap();
    prop.init(&raw, labels.clone()).unwrap();
    let mut z = labels;
    for _ in 0..10 {
        z = prop.step(&raw).unwrap();
    }
    let iou = finalize_mask(&z, 8, 192, 144).mask(1).iou(&mask);

    let pose = Pose::from_points(&[(52.0, 44.0), (107.0, 44.0), (80.0, 64.0), (52.0, 83.0), (107.0, 83.0)]);
    let mut prop = LabelPropagator::new(PropConfig::default()).unwrap();
    prop.init(&raw, pose_to_beliefs(&pose, gh, gw, 8, 0.01).unwrap())
        .unwrap();
    let mut zp = None;
    for _ in 0..10 {
        zp = Some(prop.step(&raw).unwrap());
    }
    let back = beliefs_to_pose(&zp.unwrap(), 8, 0.1);
    let drift = back
        .keypoints
        .iter()
        .zip(&pose.keypoints)
        .map(|(a, b)| if a.visible { (a.x - b.x).hypot(a.y - b.y) } else { f64::INFINITY })
        .fold(0.0, f64::max);

    // dense K z on a 4x4 grid with everything inside the window
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let feats: Vec<FeatureMap> = (0..3)
        .map(|_| {
            let data = (0..16 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
            prepare_features(&FeatureMap::new(4, 4, 5, 8, data).unwrap(), false)
        })
        .collect();
    let zs: Vec<LabelMap> = (0..2)
        .map(|_| {
            let obj = (0..2).map(|_| (0..16).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
            LabelMap::from_objects(4, 4, obj).unwrap()
        })
        .collect();
    let cfg = PropConfig {
        temperature: 0.5,
        radius: 4,
        topk: 32,
        ..PropConfig::default()
    };
    let mut bank = MemoryBank::new(2);
    bank.push(feats[0].clone(), zs[0].clone()).unwrap();
    bank.push(feats[1].clone(), zs[1].clone()).unwrap();
    let got = propagate(&bank, &feats[2], &cfg).unwrap();
    let mut oracle = 0.0f64;
    for i in 0..16 {
        let q = feats[2].cell(i);
        let scores: Vec<f64> = (0..2)
            .flat_map(|e| (0..16).map(move |j| (e, j)))
            .map(|(e, j)| {
                feats[e].cell(j).iter().zip(q).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum::<f64>()
                    / cfg.temperature
            })
            .collect();
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
        let total: f64 = w.iter().sum();
        for ch in 0..got.num_channels() {
            let want: f64 = (0..32)
                .map(|k| w[k] / total * f64::from(zs[k / 16].channel(ch)[k % 16]))
                .sum();
            oracle = oracle.max((want - f64::from(got.channel(ch)[i])).abs());
        }
    }
    check(
        iou >= 0.95 && drift <= 8.0 && oracle <= 1e-6,
        format!("mask IoU {iou:.4}, worst keypoint drift {drift:.2} px (cell 8 px), K z oracle err {oracle:.2e}"),
    )
}

fn sot_run(head: Head, r: &Rendered) -> (f64, f64) {
    let mut tr = BoxTracker::new(BoxPropConfig {
        head,
        ..BoxPropConfig::default()
    })
    .unwrap();
    tr.init(FrameInput::Image(&r.frames[0]), r.gt_box(0, 0).unwrap()).unwrap();
    let mut err = 0.0;
    let mut last_iou = 0.0;
    let n = r.frames.len();
    for f in 1..n {
        let b = tr.track_step(FrameInput::Image(&r.frames[f])).unwrap();
        let g = r.gt_box(f, 0).unwrap();
        err += (b.u - g.u).hypot(b.v - g.v);
        last_iou = b.iou(&g);
    }
    (err / (n - 1) as f64, last_iou)
}

fn c7_sot() -> Outcome {
    let start = Instant::now();
    let sc = Scenario::new(7, 50, 320, 240).with_object(SynthObject::new(
        [200, 60, 60],
        (40.0, 30.0),
        (90.0, 100.0),
        (2.0, 1.0),
    ));
    let r = render(&sc).unwrap();
    let (dcf_err, dcf_iou) = sot_run(Head::Dcf, &r);
    let (_, xc_iou) = sot_run(Head::XCorr, &r);
    let secs = start.elapsed().as_secs_f64();
    check(
        dcf_err <= 4.0 && dcf_iou >= 0.6 && xc_iou >= 0.5 && secs < 30.0,
        format!(
            "DCF mean err {dcf_err:.2} px, final IoU {dcf_iou:.3}; XCorr final IoU {xc_iou:.3}; {secs:.1} s"
        ),
    )
}

fn features_of(r: &Rendered) -> Vec<FeatureMap> {
    r.frames.iter().map(|f| extract_builtin(f, 8).unwrap()).collect()
}

fn track(r: &Rendered, feats: &[FeatureMap], cfg: AssocConfig) -> TrackSet {
    let mut tracker = Tracker::new(cfg).unwrap();
    let mut set = TrackSet::new();
    for (f, fm) in feats.iter().enumerate() {
        for o in tracker.step(f, &r.detections[f], fm).unwrap() {
            if let Shape::Box(b) = o.observation.shape {
                set.insert(o.frame, o.id, Region::Box(b)).unwrap();
            }
        }
    }
    set
}

fn three_lanes(occlusion: Option<std::ops::Range<usize>>) -> Scenario {
    let mut objs = vec![
        SynthObject::new([200, 60, 60], (36.0, 28.0), (40.0, 50.0), (2.0, 0.0)),
        SynthObject::new([60, 170, 70], (36.0, 28.0), (280.0, 120.0), (-2.0, 0.0)),
        SynthObject::new([60, 80, 210], (36.0, 28.0), (40.0, 190.0), (2.0, 0.0)),
    ];
    if let Some(o) = occlusion {
        objs[1] = objs[1].clone().with_occlusion(o);
    }
    objs.into_iter()
        .fold(Scenario::new(8, 100, 320, 240), Scenario::with_object)
}

fn c8_mot() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    let clean = render(&three_lanes(None)).unwrap();
    let feats = features_of(&clean);
    for mode in [SimilarityMode::Rsm, SimilarityMode::Cf] {
        let cfg = AssocConfig {
            similarity: mode,
            fps: 25.0,
            ..AssocConfig::default()
        };
        let pred = track(&clean, &feats, cfg);
        let c = clear_metrics(&clean.gt, &pred, 0.5);
        let i = idf1(&clean.gt, &pred, 0.5);
        ok &= i.idf1 == 1.0 && c.id_switches == 0 && c.mota == 1.0;
        details.push(format!("{mode:?}: IDF1 {:.3} IDs {} MOTA {:.3}", i.idf1, c.id_switches, c.mota));
    }
    let occluded = render(&three_lanes(Some(40..50))).unwrap();
    let feats = features_of(&occluded);
    let cfg = AssocConfig {
        fps: 25.0,
        use_motion: true,
        ..AssocConfig::default()
    };
    let pred = track(&occluded, &feats, cfg);
    let c = clear_metrics(&occluded.gt, &pred, 0.5);
    let i = idf1(&occluded.gt, &pred, 0.5);
    ok &= c.id_switches == 0;
    details.push(format!(
        "10-frame occlusion: IDs {} IDF1 {:.3}",
        c.id_switches, i.idf1
    ));
    check(ok, details.join("; "))
}

/// Two pairs of objects share a base color, so telling them apart needs
/// the texture layout; every detection is a top or bottom half with
/// probability one half.
fn half_crop_scenario(seed: u64) -> Scenario {
    let colors = [[200, 60, 60], [200, 60, 60], [60, 170, 70], [60, 170, 70]];
    let mut sc = Scenario::new(seed, 60, 320, 240);
    for (k, color) in colors.into_iter().enumerate() {
        let y = 30.0 + 58.0 * k as f64;
        let (x, v) = if k % 2 == 0 { (60.0, 3.0) } else { (260.0, -3.0) };
        sc = sc.with_object(SynthObject::new(color, (40.0, 40.0), (x, y), (v, 0.0)));
    }
    sc.noise.crop_rate = 0.5;
    sc.noise.position_sigma = 1.0;
    sc
}

fn c9_similarity_ordering() -> Outcome {
    let modes = [SimilarityMode::Rsm, SimilarityMode::Cf, SimilarityMode::Gpf];
    let seeds = 0..6u64;
    let mut sums = [0.0f64; 3];
    for seed in seeds.clone() {
        let r = render(&half_crop_scenario(seed)).unwrap();
        let feats = features_of(&r);
        for (k, mode) in modes.iter().enumerate() {
            let cfg = AssocConfig {
                similarity: *mode,
                use_motion: false,
                history: 8,
                fps: 25.0,
                ..AssocConfig::default()
            };
            // a half box overlaps its full ground truth at IoU 0.5 at best
            sums[k] += idf1(&r.gt, &track(&r, &feats, cfg), 0.25).idf1;
        }
    }
    let n = seeds.count() as f64;
    let [rsm, cf, gpf] = sums.map(|s| s / n);
    check(
        rsm >= cf && rsm >= gpf,
        format!("mean IDF1 over {n} seeds: RSM {rsm:.3}, CF {cf:.3}, GPF {gpf:.3}"),
    )
}

fn c10_metrics() -> Outcome {
    let b = |x: f64, y: f64| Region::Box(BBox::new(x, y, 10.0, 10.0).unwrap());
    let mut gt = TrackSet::new();
    let mut pred = TrackSet::new();
    for f in 0..20 {
        // two rows apart, the objects pass each other in x at frame 10
        let a = (20.0 + 3.0 * f as f64, 50.0);
        let c = (80.0 - 3.0 * f as f64, 70.0);
        gt.insert(f, 1, b(a.0, a.1)).unwrap();
        gt.insert(f, 2, b(c.0, c.1)).unwrap();
        // the tracker swaps ids as they pass
        let (p1, p2) = if f < 10 { (a, c) } else { (c, a) };
        pred.insert(f, 1, b(p1.0, p1.1)).unwrap();
        pred.insert(f, 2, b(p2.0, p2.1)).unwrap();
    }
    let perfect_c = clear_metrics(&gt, &gt, 0.5);
    let perfect_i = idf1(&gt, &gt, 0.5);
    let c = clear_metrics(&gt, &pred, 0.5);
    let i = idf1(&gt, &pred, 0.5);
    // hand count: both objects switch once; each id is right for 10 of 20
    // frames, so IDTP = IDFP = IDFN = 20
    let ok = perfect_i.idf1 == 1.0
        && perfect_c.mota == 1.0
        && perfect_c.id_switches == 0
        && c.id_switches == 2
        && i.idtp == 20
        && i.idfp == 20
        && i.idfn == 20
        && i.idf1 == 0.5
        && (c.mota - 0.95).abs() < 1e-12;
    check(
        ok,
        format!(
            "perfect: IDF1 {} MOTA {} IDs {}; crossing: IDs {} IDF1 {} MOTA {:.3}",
            perfect_i.idf1, perfect_c.mota, perfect_c.id_switches, c.id_switches, i.idf1, c.mota
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("assignment optimality", c1_assignment),
        ("spectral equivalence", c2_spectral),
        ("DCF closed-form identity", c3_dcf),
        ("chi-square gating calibration", c4_gating),
        ("RSM oracle and bounds", c5_rsm),
        ("propagation stability", c6_propagation),
        ("SOT synthetic tracking", c7_sot),
        ("end-to-end MOT", c8_mot),
        ("similarity-mode ordering", c9_similarity_ordering),
        ("metric sanity", c10_metrics),
    ];
    let mut failed = Vec::new();
    // written past the test harness's capture so the lines always show
    let mut out = std::io::stdout().lock();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let line = match run() {
            Ok(d) => format!("criterion {:>2} PASS  {name}: {d}", k + 1),
            Err(d) => {
                failed.push(k + 1);
                format!("criterion {:>2} FAIL  {name}: {d}", k + 1)
            }
        };
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
    }
    drop(out);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn unit_features_stay_unit() {
    // guards the feature preparation assumed by the oracles above
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fm = l2_normalize_points(&FeatureMap::new(2, 2, 3, 8, data).unwrap());
    for p in fm.points() {
        let n: f32 = p.iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-5);
    }
}

use foj::eval::dataset::generate_image;
use foj::eval::metrics::{best_boundary_fscore, mean_angle_error_deg, psnr};
use foj::global::junction_weight;
use foj::{analyze_image, Config};
use std::time::Instant;

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let nu_d = args.first().copied().unwrap_or(5.5);
    let n_iter = args.get(1).copied().unwrap_or(100.0) as usize;
    let reinit = args.get(2).copied().unwrap_or(25.0) as usize;
    let first = args.get(3).copied().unwrap_or(200.0) as usize;
    let count = args.get(4).copied().unwrap_or(1.0) as usize;
    let eta = args.get(5).copied().unwrap_or(0.01);
    let cfg = Config {
        patch_size: 11,
        stride: 1,
        lambda_boundary: 0.5,
        lambda_color: 0.1,
        n_init: 2,
        n_iter,
        angle_samples: 48,
        vertex_samples: 24,
        reinit_every: reinit,
        nu_d: Some(nu_d),
        eta,
        ..Config::default()
    };
    let mut fs = Vec::new();
    let mut psnrs = Vec::new();
    let mut dists = Vec::new();
    let mut angerrs = Vec::new();
    let t0 = Instant::now();
    for idx in first..first + count {
        let (image, gt) = generate_image(0, idx);
        let t = Instant::now();
        let a = analyze_image(&image, &cfg).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let (thr, pr) = best_boundary_fscore(&a.boundary, &gt, 2.0);
        let p = psnr(&a.smoothed, &image);
        fs.push(pr.f);
        psnrs.push(p);
        print!(
            "img {idx}: F {:.3} (P {:.3} R {:.3} thr {thr:.1}) PSNR {p:.1} {secs:.1}s |",
            pr.f, pr.precision, pr.recall
        );
        let mut pairs = Vec::new();
        for v in &gt.vertices {
            let (mut best_d, mut best_j) = (f64::INFINITY, usize::MAX);
            for (j, d) in a.detections.iter().enumerate() {
                let dist = ((d.point[0] - v.point[0]).powi(2)
                    + (d.point[1] - v.point[1]).powi(2))
                .sqrt();
                if dist < best_d {
                    best_d = dist;
                    best_j = j;
                }
            }
            dists.push(best_d);
            print!(" vtx ({:.1},{:.1}) d={best_d:.2}", v.point[0], v.point[1]);
            if best_d <= 2.0 {
                pairs.push((a.detections[best_j].angles.clone(), v.angles_rad()));
            }
        }
        if !pairs.is_empty() {
            let ae = mean_angle_error_deg(&pairs);
            angerrs.push(ae);
            print!(" ang {ae:.1}deg");
        }
        println!(" ndet {}", a.detections.len());
        if count == 1 {
            // Where do false-positive boundary pixels sit?
            let mask = gt.boundary_mask();
            let gt_pts: Vec<[f64; 2]> = mask
                .iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(|(i, _)| [(i % gt.width) as f64, (i / gt.width) as f64])
                .collect();
            let mut fps = Vec::new();
            for y in 0..gt.height {
                for x in 0..gt.width {
                    if a.boundary.get(x, y) >= thr {
                        let d = gt_pts
                            .iter()
                            .map(|p| (p[0] - x as f64).hypot(p[1] - y as f64))
                            .fold(f64::INFINITY, f64::min);
                        if d > 2.0 {
                            fps.push((x, y, d));
                        }
                    }
                }
            }
            println!("unmatched-pred pixels (>{:.0}px from GT): {}", 2.0, fps.len());
            for chunk in fps.chunks(10).take(5) {
                let s: Vec<String> = chunk
                    .iter()
                    .map(|(x, y, d)| format!("({x},{y},{d:.1})"))
                    .collect();
                println!("  {}", s.join(" "));
            }
            // GT pixels with no predicted pixel within 2px: true gaps.
            let pred_pts: Vec<[f64; 2]> = (0..gt.height)
                .flat_map(|y| (0..gt.width).map(move |x| (x, y)))
                .filter(|&(x, y)| a.boundary.get(x, y) >= thr)
                .map(|(x, y)| [x as f64, y as f64])
                .collect();
            let mut gaps = Vec::new();
            for p in &gt_pts {
                let d = pred_pts
                    .iter()
                    .map(|q| (q[0] - p[0]).hypot(q[1] - p[1]))
                    .fold(f64::INFINITY, f64::min);
                if d > 2.0 {
                    gaps.push((p[0] as usize, p[1] as usize));
                }
            }
            println!(
                "gt pixels with no pred within 2px: {} of {} (pred total {})",
                gaps.len(),
                gt_pts.len(),
                pred_pts.len()
            );
            for chunk in gaps.chunks(12).take(6) {
                let s: Vec<String> =
                    chunk.iter().map(|(x, y)| format!("({x},{y})")).collect();
                println!("  {}", s.join(" "));
            }
            // Boundary-map profile along the connector between the two
            // junction vertices, and the fits of patches centered there.
            let v0 = gt.vertices[0].point;
            let v1 = gt.vertices[1].point;
            let my = ((v0[1] + v1[1]) / 2.0).round() as usize;
            for row in [my - 1, my, my + 1] {
                let vals: Vec<String> = (v0[0] as usize..=v1[0] as usize + 1)
                    .map(|x| format!("{:.2}", a.boundary.get(x, row)))
                    .collect();
                println!("B row {row} x={}..: {}", v0[0] as usize, vals.join(" "));
            }
            let grid2 = a.field.grid();
            for (i, prm) in a.field.params().iter().enumerate() {
                let (pcx, pcy) = grid2.patch(i).center();
                if pcy == my && pcx >= v0[0] as usize + 2 && pcx <= v1[0] as usize - 2 {
                    let deg: Vec<f64> = prm
                        .angles
                        .iter()
                        .map(|a| (a.to_degrees() * 10.0).round() / 10.0)
                        .collect();
                    println!(
                        "  patch ({pcx},{pcy}) vtx ({:.1},{:.1}) angles {deg:?}",
                        prm.vertex[0], prm.vertex[1]
                    );
                }
            }
            // Composition of vote mass far from every true vertex.
            let field = &a.field;
            let grid = field.grid();
            let gamma = cfg.gamma_value();
            let mut rows = Vec::new();
            for (i, prm) in field.params().iter().enumerate() {
                let (pcx, pcy) = grid.patch(i).center();
                let w = junction_weight(prm, [pcx as f64, pcy as f64], gamma, cfg.nu_e);
                let dmin = gt
                    .vertices
                    .iter()
                    .map(|v| {
                        ((prm.vertex[0] - v.point[0]).powi(2)
                            + (prm.vertex[1] - v.point[1]).powi(2))
                        .sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                if dmin >= 5.0 && w > 0.2 {
                    let dc = ((prm.vertex[0] - pcx as f64).powi(2)
                        + (prm.vertex[1] - pcy as f64).powi(2))
                    .sqrt();
                    let loc = (-dc * dc / (2.0 * gamma * gamma)).exp();
                    rows.push((w, loc, (pcx, pcy), prm.clone()));
                }
            }
            rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            println!("far voters with w>0.2: {}", rows.len());
            for (w, loc, (pcx, pcy), prm) in rows.iter().take(12) {
                let deg: Vec<f64> = prm
                    .angles
                    .iter()
                    .map(|a| (a.to_degrees() * 10.0).round() / 10.0)
                    .collect();
                println!(
                    "  w {w:.2} (loc {loc:.2} ang {:.2}) center ({pcx},{pcy}) vtx ({:.1},{:.1}) angles {deg:?}",
                    w / loc,
                    prm.vertex[0],
                    prm.vertex[1]
                );
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!(
        "== nu_d {nu_d} n_iter {n_iter} reinit {reinit}: F mean {:.3} min {:.3} | PSNR mean {:.1} min {:.1} | vtx d mean {:.2} max {:.2} | ang mean {:.2} | {:.1}s/img",
        mean(&fs),
        fs.iter().cloned().fold(f64::INFINITY, f64::min),
        mean(&psnrs),
        psnrs.iter().cloned().fold(f64::INFINITY, f64::min),
        mean(&dists),
        dists.iter().cloned().fold(0.0, f64::max),
        mean(&angerrs),
        t0.elapsed().as_secs_f64() / count as f64
    );
}

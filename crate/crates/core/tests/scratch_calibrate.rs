// Temporary calibration probe; removed once defaults are fixed.
use spinewave::config::load_config;
use spinewave::sim::{run_deterministic, FieldSnapshot};

#[test]
#[ignore]
fn probe_sds() {
    for r in [0.5, 1.0, 2.0] {
        for eta in [1.0, 2.0, 5.0] {
            for tau_s in [0.5, 1.0, 2.0] {
                let cfg = load_config(&format!(
                    "model = sds\nn_spines = 9\nl = 7.2\nt_final = 40\ndx = 0.1\nr = {r}\neta_0 = {eta}\ntau_s = {tau_s}\n"
                ))
                .unwrap();
                let mut max_u = vec![0.0f64; 9];
                let mut max_v = 0.0f64;
                let mut obs = |_t: f64, snap: &FieldSnapshot<'_>| {
                    if let Some(u) = snap.u {
                        for (acc, x) in max_u.iter_mut().zip(u) {
                            *acc = acc.max(*x);
                        }
                    }
                    max_v = max_v.max(snap.v.iter().cloned().fold(0.0, f64::max));
                };
                let rec = run_deterministic(&cfg, Some(&mut obs)).unwrap();
                let fired = {
                    let mut f = vec![false; 9];
                    for e in &rec.fire_log {
                        f[e.spine] = true;
                    }
                    f.iter().filter(|x| **x).count()
                };
                println!(
                    "r={r} eta={eta} tau_s={tau_s}: spines_fired={fired} events={} maxV={:.3} maxU={:?}",
                    rec.fire_log.len(),
                    max_v,
                    max_u.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>()
                );
            }
        }
    }
}

#[test]
#[ignore]
fn probe_br() {
    for rho in [5.0, 15.0, 25.0, 50.0] {
        for r in [1.0, 2.0, 5.0] {
            let cfg = load_config(&format!(
                "model = br\nn_spines = 21\nt_final = 40\ndx = 0.1\nrho_max = {rho}\nr = {r}\nstim_amp = 40\n"
            ))
            .unwrap();
            let mut max_u_mid = f64::MIN;
            let mut max_v_far = f64::MIN;
            let mut obs = |_t: f64, snap: &FieldSnapshot<'_>| {
                if let Some(u) = snap.u {
                    max_u_mid = max_u_mid.max(u[u.len() / 2]);
                }
                max_v_far = max_v_far.max(snap.v[snap.v.len() - 20]);
            };
            let rec = run_deterministic(&cfg, Some(&mut obs)).unwrap();
            println!(
                "rho={rho} r={r}: fires={} maxU(mid)={max_u_mid:.1} maxV(far)={max_v_far:.1} div={}",
                rec.fire_log.len(),
                rec.diverged
            );
        }
    }
}

#[test]
#[ignore]
fn probe_br_dt() {
    for dt in [0.01, 0.005, 0.0025, 0.00125] {
        for (rho, r, amp) in [(15.0, 1.0, 40.0), (25.0, 2.0, 60.0), (25.0, 2.0, 90.0), (50.0, 5.0, 90.0)] {
            let cfg = load_config(&format!(
                "model = br\nn_spines = 21\nt_final = 30\ndx = 0.1\ndt = {dt}\nrho_max = {rho}\nr = {r}\nstim_amp = {amp}\nstim_width = 3\n"
            ))
            .unwrap();
            let mut umax_t: Vec<(f64, f64, f64)> = Vec::new();
            let mut obs = |t: f64, snap: &FieldSnapshot<'_>| {
                if let Some(u) = snap.u {
                    let um = u.iter().cloned().fold(f64::MIN, f64::max);
                    let vm = snap.v.iter().cloned().fold(f64::MIN, f64::max);
                    if umax_t.is_empty() || t - umax_t.last().unwrap().0 > 2.0 {
                        umax_t.push((t, um, vm));
                    }
                }
            };
            let rec = run_deterministic(&cfg, Some(&mut obs)).unwrap();
            let tail: Vec<String> = umax_t
                .iter()
                .map(|(t, u, v)| format!("t{t:.0}:U{u:.0}/V{v:.0}"))
                .collect();
            println!(
                "dt={dt} rho={rho} r={r} amp={amp}: fires={} div={} {}",
                rec.fire_log.len(),
                rec.diverged,
                tail.join(" ")
            );
        }
    }
}

#[test]
#[ignore]
fn probe_br_grid() {
    for dt in [0.005, 0.0025] {
        for rho in [5.0, 10.0, 25.0, 50.0] {
            for r in [0.5, 1.0, 2.0, 4.0] {
                let cfg = load_config(&format!(
                    "model = br\nn_spines = 21\nt_final = 40\ndx = 0.1\ndt = {dt}\nrho_max = {rho}\nr = {r}\nstim_amp = 50\nstim_width = 2\n"
                ))
                .unwrap();
                let mut fire_x: Vec<(usize, f64)> = Vec::new();
                let rec = run_deterministic(&cfg, None).unwrap();
                for e in &rec.fire_log {
                    fire_x.push((e.spine, e.t));
                }
                let far_peak = rec.traces.v2.iter().cloned().fold(f64::MIN, f64::max);
                let speed = if fire_x.len() >= 15 {
                    let (s0, t0) = fire_x[5];
                    let (s1, t1) = fire_x[14];
                    if t1 > t0 {
                        (s1 as f64 - s0 as f64) * 0.8 / (t1 - t0)
                    } else {
                        f64::NAN
                    }
                } else {
                    f64::NAN
                };
                println!(
                    "dt={dt} rho={rho} r={r}: fires={} farV={far_peak:.1} speed~{speed:.2} div={}",
                    fire_x.len(),
                    rec.diverged
                );
            }
        }
    }
}

#[test]
#[ignore]
fn probe_br_dx() {
    for dx in [0.2, 0.1, 0.05] {
        for (rho, r) in [(5.0, 0.5), (5.0, 1.0), (10.0, 0.5), (10.0, 1.0), (25.0, 1.0), (2.0, 0.5), (2.0, 1.0), (3.0, 0.5)] {
            let cfg = load_config(&format!(
                "model = br\nn_spines = 21\nt_final = 60\ndx = {dx}\ndt = 0.0025\nrho_max = {rho}\nr = {r}\nstim_amp = 50\nstim_width = 2\n"
            ))
            .unwrap();
            let rec = run_deterministic(&cfg, None).unwrap();
            let far_peak = rec.traces.v2.iter().cloned().fold(f64::MIN, f64::max);
            let n_fired = {
                let mut f = vec![false; 21];
                for e in &rec.fire_log {
                    f[e.spine] = true;
                }
                f.iter().filter(|x| **x).count()
            };
            let speed = {
                let mut first = vec![f64::INFINITY; 21];
                for e in &rec.fire_log {
                    if e.t < first[e.spine] {
                        first[e.spine] = e.t;
                    }
                }
                if first[18].is_finite() && first[6].is_finite() {
                    (18.0 - 6.0) * 0.8 / (first[18] - first[6])
                } else {
                    f64::NAN
                }
            };
            println!(
                "dx={dx} rho={rho} r={r}: fired={n_fired}/21 farV={far_peak:.1} c~{speed:.3} div={}",
                rec.diverged
            );
        }
    }
}

#[test]
#[ignore]
fn probe_trends() {
    use spinewave::speed::ensemble_speed;
    use std::time::Instant;

    // Deterministic speeds and timing first.
    for (name, text) in [
        ("sds-full", "model = sds\nt_final = 150\n".to_string()),
        ("br-n21", "model = br\nn_spines = 21\nt_final = 60\n".to_string()),
    ] {
        let cfg = load_config(&text).unwrap();
        let t0 = Instant::now();
        let reference = spinewave::speed::deterministic_reference(&cfg).unwrap();
        println!(
            "{name}: c_det={:.4} theta={:.3} det_wall={:?}",
            reference.c_det,
            reference.theta,
            t0.elapsed()
        );
    }

    for (name, base) in [
        (
            "sds spines ito white",
            "model = sds\nt_final = 150\ntarget = spines\nnoise_kind = white\n".to_string(),
        ),
        (
            "sds cable ito white",
            "model = sds\nt_final = 150\ntarget = cable\nnoise_kind = white\n".to_string(),
        ),
        (
            "br m ito white",
            "model = br\nn_spines = 21\nt_final = 60\ntarget = spines\nnoise_kind = white\n".to_string(),
        ),
        (
            "br cable ito white",
            "model = br\nn_spines = 21\nt_final = 60\ntarget = cable\nnoise_kind = white\n".to_string(),
        ),
    ] {
        for nu in [0.05, 0.15, 0.25] {
            let cfg = load_config(&format!("{base}nu = {nu}\nseed = 11\n")).unwrap();
            let t0 = Instant::now();
            match ensemble_speed(&cfg, 20) {
                Ok(out) => println!(
                    "{name} nu={nu}: mean_c={:.4} sd={:.4} failed={} nonseq={} wall={:?}",
                    out.stats.mean_c,
                    out.stats.sd_c,
                    out.stats.n_failed,
                    out.stats.n_nonsequential,
                    t0.elapsed()
                ),
                Err(e) => println!("{name} nu={nu}: {e}"),
            }
        }
    }
}

#[test]
#[ignore]
fn probe_sds_margin() {
    use spinewave::speed::ensemble_speed;
    for eta in [1.1, 1.2, 1.4, 1.7, 2.0] {
        let base = format!("model = sds\nt_final = 200\neta_0 = {eta}\ntarget = spines\nnoise_kind = white\nseed = 3\n");
        let det = load_config(&base).unwrap();
        match spinewave::speed::deterministic_reference(&det) {
            Ok(reference) => {
                print!("eta={eta}: c_det={:.4}", reference.c_det);
                for nu in [0.1, 0.25] {
                    let cfg = load_config(&format!("{base}nu = {nu}\n")).unwrap();
                    match ensemble_speed(&cfg, 20) {
                        Ok(out) => print!(
                            "  nu{nu}: mean={:.4} sd={:.4} fail={} nonseq={}",
                            out.stats.mean_c, out.stats.sd_c, out.stats.n_failed, out.stats.n_nonsequential
                        ),
                        Err(e) => print!("  nu{nu}: ERR {e}"),
                    }
                }
                println!();
            }
            Err(e) => println!("eta={eta}: det failed: {e}"),
        }
    }
}

#[test]
#[ignore]
fn probe_sds_fine() {
    use spinewave::speed::ensemble_speed;
    for (eta, r, tau_s) in [
        (1.3, 1.0, 1.0),
        (1.35, 1.0, 1.0),
        (1.4, 1.0, 1.0),
        (1.5, 1.0, 1.0),
        (2.0, 1.5, 1.0),
        (1.4, 1.0, 0.8),
    ] {
        let base = format!(
            "model = sds\nt_final = 200\neta_0 = {eta}\nr = {r}\ntau_s = {tau_s}\ntarget = spines\nnoise_kind = white\nseed = 5\n"
        );
        let det = load_config(&base).unwrap();
        match spinewave::speed::deterministic_reference(&det) {
            Ok(reference) => {
                print!("eta={eta} r={r} ts={tau_s}: c_det={:.3} |", reference.c_det);
                for nu in [0.1, 0.2, 0.3, 0.4] {
                    let cfg = load_config(&format!("{base}nu = {nu}\n")).unwrap();
                    match ensemble_speed(&cfg, 30) {
                        Ok(out) => print!(
                            " {nu}:{:.4}±{:.4}(f{}
n{})",
                            out.stats.mean_c, out.stats.sd_c, out.stats.n_failed, out.stats.n_nonsequential
                        ),
                        Err(e) => print!(" {nu}:ERR({e})"),
                    }
                }
                println!();
            }
            Err(e) => println!("eta={eta} r={r} ts={tau_s}: det failed: {e}"),
        }
    }
}

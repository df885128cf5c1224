//! Scratch probe for acceptance-configuration tuning (not shipped).

use dyncav_core::*;
use std::time::Instant;

fn cfg(kind: NonlinearityKind, gamma: f64, gamma_l: f64, chi2: f64, chi3: f64, dt: f64) -> RunConfig {
    RunConfig {
        system: SystemConfig {
            gamma,
            gamma_l,
            chi2,
            chi3,
            nonlinearity: kind,
            ..SystemConfig::default()
        },
        schedule: ScheduleSpec::default(),
        tau_g: 1.0,
        dt,
    }
}

fn c1() {
    let run = cfg(NonlinearityKind::Chi2Shg, 6.0, 1.5e-4, 0.090, 0.0, 1.0 / 200.0);
    let t0 = Instant::now();
    let (m, c) = run_memory_single(&run).unwrap();
    println!(
        "c1: eta_meas={:.6} eta_pred={:.6} p_pass={:.3e} p_l={:.3e} f1={:.6} f1_her={:.6} t={:?}",
        m.eta_measured, c.eta, m.p_pass, m.p_l, m.f1, m.f1_heralded, t0.elapsed()
    );
}

fn c4() {
    let grid2 = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0];
    let grid3 = [4.0, 6.0, 9.0, 13.0, 18.0, 24.0, 30.0, 38.0];
    let t0 = Instant::now();
    for (name, kind, x2, x3, grid) in [
        ("chi2", NonlinearityKind::Chi2Shg, 0.090, 0.0, grid2),
        ("chi3", NonlinearityKind::Chi3, 0.0, 0.1, grid3),
    ] {
        for &g in &grid {
            let run = cfg(kind, g, 0.0, x2, x3, 1.0 / 400.0);
            match run_memory_single(&run) {
                Ok((m, _)) => println!("c4: {name} gamma={g:5.1} p_pass={:.6e}", m.p_pass),
                Err(e) => println!("c4: {name} gamma={g:5.1} ERROR {e}"),
            }
        }
    }
    println!("c4: total {:?}", t0.elapsed());
}

fn c2() {
    // Coarse chi2 scan at dt = 1/50, then report around the F2 maximum.
    for dt_div in [50.0, 100.0] {
        for x2 in [0.080, 0.084, 0.088, 0.090, 0.092, 0.096] {
            let run = cfg(NonlinearityKind::Chi2Shg, 6.0, 1.5e-4, x2, 0.0, 1.0 / dt_div);
            let t0 = Instant::now();
            match run_gate_chi2(&run) {
                Ok(r) => println!(
                    "c2: dt=1/{dt_div} chi2={x2:.4} F2={:.5} dtheta={:.5} F1={:.5} t={:?}",
                    r.f2, r.delta_theta, r.f1, t0.elapsed()
                ),
                Err(e) => println!("c2: dt=1/{dt_div} chi2={x2:.4} ERROR {e}"),
            }
        }
    }
}

fn c7() {
    for x3 in [0.05, 0.1, 0.2] {
        let run = cfg(NonlinearityKind::Chi3, 30.0, 1e-5, 0.0, x3, 1.0 / 400.0);
        let t0 = Instant::now();
        match find_store_time(&run, std::f64::consts::PI) {
            Ok((ts, r)) => println!(
                "c7: chi3={x3} T_store={ts:.4} dtheta={:.6} F2={:.5} t={:?}",
                r.delta_theta, r.f2, t0.elapsed()
            ),
            Err(e) => println!("c7: chi3={x3} ERROR {e}"),
        }
    }
}

fn c3() {
    for gl in [1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3] {
        let run = cfg(NonlinearityKind::Chi3, 30.0, gl, 0.0, 0.1, 1.0 / 400.0);
        match run_memory_single(&run) {
            Ok((m, c)) => {
                let law = c.eta / (m.p_pass + c.eta);
                println!(
                    "c3: gl={gl:.1e} F1her={:.7} law={:.7} diff={:.2e} 1-Ppass={:.7} eta={:.4e} p_pass={:.4e}",
                    m.f1_heralded,
                    law,
                    (m.f1_heralded - law).abs(),
                    1.0 - m.p_pass,
                    c.eta,
                    m.p_pass
                );
            }
            Err(e) => println!("c3: gl={gl:.1e} ERROR {e}"),
        }
    }
}

fn oracle_run() -> RunConfig {
    let mut run = cfg(NonlinearityKind::Chi2Shg, 1.0, 0.0, 0.1, 0.0, 1.0 / 200.0);
    run.schedule = ScheduleSpec { t_in: 2.0, t_store: 5.0, tau_o: 2.5, tau_e: 1.0, eps_eta: 1e-4 };
    run
}

fn c6() {
    let run = oracle_run();
    let controls = match synthesize_protocol(&run) {
        Ok(c) => c,
        Err(e) => {
            println!("c6: synthesis ERROR {e}");
            return;
        }
    };
    let grid = controls.full_grid.clone();
    let xi = Wavepacket::gaussian(GaussianSpec::new(1.0, run.schedule.t_in), &grid);
    let trace = propagate_two_mode(&xi.signal, &controls.combined, &run, C64::new(0.0, 0.0), C64::new(0.0, 0.0)).unwrap();

    let mut pts = Vec::new();
    for n_bins in [100, 200, 400, 800] {
        let state = run_single_bins(&xi.signal, &controls.combined.combined, &run, n_bins).unwrap();
        let err = single_bin_error(&state, &trace.xi_out);
        let dt_bin = (grid.t_end() - grid.t_start) / n_bins as f64;
        println!("c6: single n={n_bins} dt_bin={dt_bin:.4} err={err:.5e}");
        pts.push((dt_bin, err));
    }
    let (order, constant) = convergence_report(&pts);
    println!("c6: single fit order={order:.4} constant={constant:.4e}");

    let terms = terms_for(&run.system.rates(run.tau_g));
    let t0 = Instant::now();
    let field = propagate_two_photon(&xi.signal, &controls.combined, &run, &terms, true).unwrap();
    println!("c6: ODE matrix time {:?}", t0.elapsed());
    let mat = field.xi_out.as_ref().unwrap();
    for n_bins in [32, 64, 128, 256] {
        let state = run_pair_bins(&xi.signal, &controls.combined.combined, &run, n_bins).unwrap();
        let err = pair_bin_error(&state, mat, grid.t_start);
        let dt_bin = (grid.t_end() - grid.t_start) / n_bins as f64;
        println!(
            "c6: pair n={n_bins} dt_bin={dt_bin:.4} err={err:.5e} norm={:.4}",
            state.total_norm()
        );
    }
}

fn c8() {
    let mut run = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
    run.system.delta_e = 1.15;
    run.schedule.t_store = 48.0;
    let t0 = Instant::now();
    match run_gate_tle(&run) {
        Ok(out) => println!(
            "c8: conv={} pb1={:.6} pb2={:.6} phase={:.6} obj={:.3e} t={:?}",
            out.converged, out.pb_single, out.pb_double, out.stage_phase, out.objective, t0.elapsed()
        ),
        Err(e) => println!("c8: ERROR {e}"),
    }

    // Closed forms at dt = 1/1000.
    let run2 = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 1000.0);
    let grid = TimeGrid::span(0.0, 4.0, run2.dt).unwrap();
    let zero = gate_zero_control(&grid);
    let mut s0 = TleStageState::zero();
    s0.amps[6] = C64::new(1.0, 0.0); // TLE_01G
    let trace = propagate_tle_stage(&s0, &zero, &run2).unwrap();
    let g = run2.system.rates(1.0).g_tle.norm();
    let mut worst = 0.0f64;
    for k in 0..grid.n_points {
        let expect = (g * grid.t(k)).sin().powi(2);
        worst = worst.max((trace.states[k].amps[7].norm_sqr() - expect).abs());
    }
    println!("c8: vacuum-Rabi worst={worst:.3e}");

    let run3 = cfg(NonlinearityKind::Chi2Shg, 6.0, 0.0, 0.089, 0.0, 1.0 / 1000.0);
    let rates = run3.system.rates(1.0);
    let terms = terms_for(&rates);
    let grid3 = TimeGrid::span(0.0, 10.0, run3.dt).unwrap();
    let zero3 = gate_zero_control(&grid3);
    let state0 = TwoPhotonState { pair: [C64::new(0.0, 0.0); 2], doubles: [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)] };
    let amps = propagate_pair_from(&state0, None, &zero3, &run3, &terms).unwrap();
    let mut worst3 = 0.0f64;
    for k in 0..grid3.n_points {
        let expect = ((std::f64::consts::SQRT_2 * rates.chi2) * grid3.t(k)).cos().powi(2);
        worst3 = worst3.max((amps.psi02.values[k].norm_sqr() - expect).abs());
    }
    println!("c8: shg-flip worst={worst3:.3e}");
}

fn gate_zero_control(grid: &TimeGrid) -> ControlSolution {
    ControlSolution::zero(grid.clone())
}

fn tle_outcome(pi: &PiParametrization, run: &RunConfig) -> (f64, f64, f64) {
    let grid = TimeGrid::span(0.0, pi.duration, run.dt * run.tau_g).unwrap();
    let control = pi.control_on(&grid);
    let mut s0 = TleStageState::zero();
    s0.amps[TLE_10G] = C64::new(1.0, 0.0);
    s0.amps[TLE_20G] = C64::new(1.0, 0.0);
    let trace = propagate_tle_stage(&s0, &control, run).unwrap();
    let end = trace.final_state();
    let phase = wrap_angle(end.amps[TLE_20G].arg() - 2.0 * end.amps[TLE_10G].arg());
    (end.pb_single(), end.pb_double(), phase)
}

fn c8b() {
    let mut run = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
    run.schedule.t_store = 13.0;
    let duration = run.schedule.t_store;
    let h = duration / 4.0;
    let unit = std::f64::consts::PI / (2.0 * h); // one full swap per bump

    let t0 = Instant::now();
    let mut top: Vec<(f64, f64, f64, f64, f64, f64)> = Vec::new(); // obj, a, b, phi, pb1, pb2
    let steps = 24;
    for ia in 1..=steps {
        let a = unit * 1.4 * ia as f64 / steps as f64;
        for ib in 1..=steps {
            let b = unit * 1.4 * ib as f64 / steps as f64;
            for ip in 0..steps {
                let phi = 2.0 * std::f64::consts::PI * ip as f64 / steps as f64;
                let pi = PiParametrization {
                    coeffs: vec![C64::new(a, 0.0), C64::from_polar(b, phi), C64::new(a, 0.0)],
                    duration,
                };
                let (pb1, pb2, phase) = tle_outcome(&pi, &run);
                let obj = (1.0 - pb1)
                    + (1.0 - pb2)
                    + wrap_angle(phase - std::f64::consts::PI).powi(2)
                        / std::f64::consts::PI.powi(2);
                top.push((obj, a, b, phi, pb1, pb2));
            }
        }
    }
    top.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    println!("c8b: scan {:?} ({} evals)", t0.elapsed(), steps * steps * steps);
    for (obj, a, b, phi, pb1, pb2) in top.iter().take(8) {
        println!(
            "c8b: obj={obj:.4e} a={:.4} b={:.4} phi={phi:.4} pb1={pb1:.5} pb2={pb2:.5} (a/unit={:.3} b/unit={:.3})",
            a, b, a / unit, b / unit
        );
    }

    // Polish the best seed in the full 3-bump complex space.
    let (_, a, b, phi, _, _) = top[0];
    let seed = PiParametrization {
        coeffs: vec![C64::new(a, 0.0), C64::from_polar(b, phi), C64::new(a, 0.0)],
        duration,
    };
    let opts = OptimizeOptions { n_bumps: 3, max_evals: 6000, restarts: 6, seed: 7 };
    let t1 = Instant::now();
    match optimize_pi_control(&run, Some(&seed), &opts) {
        Ok((pi, out)) => {
            println!(
                "c8b: polished conv={} pb1={:.6} pb2={:.6} phase={:.6} obj={:.3e} t={:?}",
                out.converged, out.pb_single, out.pb_double, out.stage_phase, out.objective, t1.elapsed()
            );
            for (k, c) in pi.coeffs.iter().enumerate() {
                println!("c8b: coeff[{k}] = {:.6} * exp(i {:.6})  (|c|/unit={:.4})", c.norm(), c.arg(), c.norm() / unit);
            }
        }
        Err(e) => println!("c8b: polish ERROR {e}"),
    }
}

fn c8c() {
    // Dispersive design: detuned emitter, one smooth swap bump. The sectors
    // acquire different adiabatic phases through the sqrt(2)-enhanced
    // emitter chain; scan the bump amplitude for the pi crossing.
    for de in [1.0, 2.0, 3.0] {
        let mut run = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
        run.system.delta_e = de;
        run.schedule.t_store = 13.0;
        let duration = run.schedule.t_store;
        for ia in 1..=15 {
            let a = 0.1 * ia as f64;
            let pi = PiParametrization { coeffs: vec![C64::new(a, 0.0)], duration };
            let (pb1, pb2, phase) = tle_outcome(&pi, &run);
            println!("c8c: de={de} a={a:.2} pb1={pb1:.5} pb2={pb2:.5} phase={phase:.4}");
        }
        println!();
    }
}

fn c8d() {
    // Geometric design at resonance: both sectors ride zero-energy dark
    // states; winding the control phase accumulates a photon-number-
    // dependent Berry phase with zero dynamical phase. Two windings at
    // |Pi| ~ 0.6 g should land the conditional phase at pi.
    let g = 2.0 * std::f64::consts::LN_2 * 4.0; // 1 Omega_G in rate units... computed below
    let _ = g;
    for t_store in [13.0, 20.0] {
        let mut run = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
        run.schedule.t_store = t_store;
        let duration = t_store;
        let g_rate = run.system.rates(run.tau_g).g_tle.norm();
        for loops in [1.0f64, 2.0, 3.0] {
            for rfac in [0.4, 0.5, 0.6, 0.7, 0.8] {
                let r = rfac * g_rate;
                let k = 12usize;
                let coeffs: Vec<C64> = (0..k)
                    .map(|j| {
                        let phi = 2.0 * std::f64::consts::PI * loops * (j as f64 + 1.0)
                            / (k as f64 + 1.0);
                        C64::from_polar(r, phi)
                    })
                    .collect();
                let pi = PiParametrization { coeffs, duration };
                let (pb1, pb2, phase) = tle_outcome(&pi, &run);
                println!(
                    "c8d: T={t_store} loops={loops} r/g={rfac:.2} pb1={pb1:.5} pb2={pb2:.5} phase={phase:.4}"
                );
            }
        }
        println!();
    }
}

fn c8e() {
    // Polish the best geometric seed with the optimizer.
    let mut run = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
    let args: Vec<String> = std::env::args().collect();
    let t_store: f64 = args.iter().position(|a| a == "c8e").and_then(|p| args.get(p + 1)).and_then(|s| s.parse().ok()).unwrap_or(13.0);
    let rfac: f64 = args.iter().position(|a| a == "c8e").and_then(|p| args.get(p + 2)).and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let loops: f64 = args.iter().position(|a| a == "c8e").and_then(|p| args.get(p + 3)).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    run.schedule.t_store = t_store;
    let g_rate = run.system.rates(run.tau_g).g_tle.norm();
    let k = 12usize;
    let coeffs: Vec<C64> = (0..k)
        .map(|j| {
            let phi = 2.0 * std::f64::consts::PI * loops * (j as f64 + 1.0) / (k as f64 + 1.0);
            C64::from_polar(rfac * g_rate, phi)
        })
        .collect();
    let seed = PiParametrization { coeffs, duration: t_store };
    let opts = OptimizeOptions { n_bumps: k, max_evals: 8000, restarts: 4, seed: 7 };
    let t0 = Instant::now();
    match optimize_pi_control(&run, Some(&seed), &opts) {
        Ok((_, out)) => println!(
            "c8e: T={t_store} rfac={rfac} loops={loops} conv={} pb1={:.6} pb2={:.6} phase={:.6} obj={:.3e} t={:?}",
            out.converged, out.pb_single, out.pb_double, out.stage_phase, out.objective, t0.elapsed()
        ),
        Err(e) => println!("c8e: ERROR {e}"),
    }
}

fn c8g() {
    // Stark-compensated geometric design: delta_e = 2 r matches the pump
    // shift of modes b, c at the plateau, restoring the dark states; the
    // dark-branch energies are then 2|Pi| (single) and 4|Pi| (double), so
    // dynamical conditional phase cancels and only the Berry difference
    // remains.
    for t_store in [13.0, 16.0, 20.0] {
        for rfac in [0.50, 0.55, 0.60, 0.65, 0.70] {
            let mut run = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
            run.system.delta_e = 2.0 * rfac;
            run.schedule.t_store = t_store;
            let g_rate = run.system.rates(run.tau_g).g_tle.norm();
            let r = rfac * g_rate;
            let k = 12usize;
            let loops = 2.0;
            let coeffs: Vec<C64> = (0..k)
                .map(|j| {
                    let phi =
                        2.0 * std::f64::consts::PI * loops * (j as f64 + 1.0) / (k as f64 + 1.0);
                    C64::from_polar(r, phi)
                })
                .collect();
            let pi = PiParametrization { coeffs, duration: t_store };
            let (pb1, pb2, phase) = tle_outcome(&pi, &run);
            println!(
                "c8g: T={t_store} r/g={rfac:.2} de={:.2} pb1={pb1:.5} pb2={pb2:.5} phase={phase:.4}",
                2.0 * rfac
            );
        }
        println!();
    }
}

fn c8h() {
    // Discretization study of the winding seed: more bumps = smaller and
    // faster magnitude wobble (should restore adiabaticity).
    for t_store in [16.0, 20.0] {
        for k in [16usize, 24, 32, 48] {
            for rfac in [0.55, 0.60, 0.65] {
                let mut run =
                    cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
                run.system.delta_e = 2.0 * rfac;
                run.schedule.t_store = t_store;
                let g_rate = run.system.rates(run.tau_g).g_tle.norm();
                let r = rfac * g_rate;
                let loops = 2.0;
                let coeffs: Vec<C64> = (0..k)
                    .map(|j| {
                        let phi = 2.0 * std::f64::consts::PI * loops * (j as f64 + 1.0)
                            / (k as f64 + 1.0);
                        C64::from_polar(r, phi)
                    })
                    .collect();
                let pi = PiParametrization { coeffs, duration: t_store };
                let (pb1, pb2, phase) = tle_outcome(&pi, &run);
                println!(
                    "c8h: T={t_store} K={k} r/g={rfac:.2} pb1={pb1:.5} pb2={pb2:.5} phase={phase:.4}"
                );
            }
        }
        println!();
    }
}

fn c8i() {
    // Trajectory dump for the winding seed: where does the population go?
    let mut run = cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
    let rfac = 0.60;
    run.system.delta_e = 2.0 * rfac;
    run.schedule.t_store = 16.0;
    let t_store = run.schedule.t_store;
    let g_rate = run.system.rates(run.tau_g).g_tle.norm();
    let r = rfac * g_rate;
    let k = 48usize;
    let loops = 2.0;
    let coeffs: Vec<C64> = (0..k)
        .map(|j| {
            let phi = 2.0 * std::f64::consts::PI * loops * (j as f64 + 1.0) / (k as f64 + 1.0);
            C64::from_polar(r, phi)
        })
        .collect();
    let pi = PiParametrization { coeffs, duration: t_store };
    let grid = TimeGrid::span(0.0, t_store, run.dt).unwrap();
    let control = pi.control_on(&grid);
    let mut s0 = TleStageState::zero();
    s0.amps[TLE_10G] = C64::new(1.0, 0.0);
    s0.amps[TLE_20G] = C64::new(1.0, 0.0);
    let trace = propagate_tle_stage(&s0, &control, &run).unwrap();
    for frac in [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0] {
        let idx = ((grid.n_points - 1) as f64 * frac) as usize;
        let s = &trace.states[idx];
        let lam = control.combined.values[idx];
        println!(
            "c8i: t={:5.2} |Pi|={:.3} arg={:6.3} | 20g={:.4} 11g={:.4} 02g={:.4} 10e={:.4} 01e={:.4} | 10g={:.4} 01g={:.4} 00e={:.4}",
            grid.t(idx),
            lam.norm(),
            lam.arg(),
            s.amps[TLE_20G].norm_sqr(),
            s.amps[TLE_11G].norm_sqr(),
            s.amps[TLE_02G].norm_sqr(),
            s.amps[TLE_10E].norm_sqr(),
            s.amps[TLE_01E].norm_sqr(),
            s.amps[TLE_10G].norm_sqr(),
            s.amps[TLE_01G].norm_sqr(),
            s.amps[TLE_00E].norm_sqr()
        );
    }
}

fn winding_seed(
    t_store: f64,
    k: usize,
    t_ramp: f64,
    rfac: f64,
    loops: f64,
    g_rate: f64,
) -> PiParametrization {
    // Smooth-envelope winding seed: |Pi| rises 0 -> r with a sin^2 profile
    // over t_ramp (sampled at bump centers), stays flat, and falls
    // symmetrically; the phase winds only on the plateau with zero rate at
    // both edges (s - sin(2 pi s)/(2 pi), whose derivative is 2 sin^2(pi s)).
    let pi = std::f64::consts::PI;
    let r = rfac * g_rate;
    let h = t_store / (k as f64 + 1.0);
    let coeffs: Vec<C64> = (0..k)
        .map(|j| {
            let t = (j as f64 + 1.0) * h;
            let amp = if t < t_ramp {
                r * (pi * t / (2.0 * t_ramp)).sin().powi(2)
            } else if t > t_store - t_ramp {
                r * (pi * (t_store - t) / (2.0 * t_ramp)).sin().powi(2)
            } else {
                r
            };
            let s = ((t - t_ramp) / (t_store - 2.0 * t_ramp)).clamp(0.0, 1.0);
            let phi = 2.0 * pi * loops * (s - (2.0 * pi * s).sin() / (2.0 * pi));
            C64::from_polar(amp, phi)
        })
        .collect();
    PiParametrization { coeffs, duration: t_store }
}

fn c8j() {
    for (t_store, k) in [(32.0, 45usize), (48.0, 67)] {
        for t_ramp in [5.0, 8.0] {
            for rfac in [0.56, 0.58, 0.60, 0.62, 0.64] {
                let mut run =
                    cfg(NonlinearityKind::TwoLevelEmitter, 30.0, 0.0, 0.0, 0.0, 1.0 / 200.0);
                run.system.delta_e = 2.0 * rfac;
                run.schedule.t_store = t_store;
                let g_rate = run.system.rates(run.tau_g).g_tle.norm();
                let pi = winding_seed(t_store, k, t_ramp, rfac, 2.0, g_rate);
                let (pb1, pb2, phase) = tle_outcome(&pi, &run);
                println!(
                    "c8j: T={t_store} K={k} Tr={t_ramp} r/g={rfac:.2} pb1={pb1:.5} pb2={pb2:.5} phase={phase:.4}"
                );
            }
            println!();
        }
    }
}

fn c8k() {
    // Refinement around the passing point: margin vs ramp time, bump count,
    // r, and integrator step.
    for (t_store, k) in [(48.0, 67usize), (48.0, 79), (56.0, 79)] {
        for t_ramp in [8.0, 10.0, 12.0] {
            for rfac in [0.570, 0.575, 0.580, 0.585, 0.590] {
                for dt_div in [200.0, 400.0] {
                    let mut run = cfg(
                        NonlinearityKind::TwoLevelEmitter,
                        30.0,
                        0.0,
                        0.0,
                        0.0,
                        1.0 / dt_div,
                    );
                    run.system.delta_e = 2.0 * rfac;
                    run.schedule.t_store = t_store;
                    let g_rate = run.system.rates(run.tau_g).g_tle.norm();
                    let pi = winding_seed(t_store, k, t_ramp, rfac, 2.0, g_rate);
                    let (pb1, pb2, phase) = tle_outcome(&pi, &run);
                    let miss = wrap_angle(phase - std::f64::consts::PI).abs();
                    let ok = (1.0 - pb1) < 1e-2 && (1.0 - pb2) < 1e-2 && miss < 0.05;
                    println!(
                        "c8k: T={t_store} K={k} Tr={t_ramp} r/g={rfac:.3} dt=1/{dt_div} pb1={pb1:.5} pb2={pb2:.5} miss={miss:.4} {}",
                        if ok { "PASS" } else { "----" }
                    );
                }
            }
            println!();
        }
    }
}

fn c9() {
    for (name, run) in [
        ("chi2", cfg(NonlinearityKind::Chi2Shg, 6.0, 1.5e-4, 0.089, 0.0, 1.0 / 200.0)),
        ("chi3", cfg(NonlinearityKind::Chi3, 30.0, 1.5e-4, 0.0, 0.1, 1.0 / 400.0)),
    ] {
        let c = synthesize_protocol(&run).unwrap();
        let ra = substitution_residual(&c.xi_in, &c.absorption, &c.absorption_inter, &run, Stage::Absorb);
        let re = substitution_residual(&c.xi_target, &c.emission, &c.emission_inter, &run, Stage::Emit);
        let bound = 10.0 * run.dt * run.dt;
        println!("c9: {name} absorb={ra:.4e} emit={re:.4e} bound={bound:.4e}");
    }
}

fn c10() {
    for dt_div in [200.0, 400.0, 800.0, 2000.0] {
        let run = cfg(NonlinearityKind::Chi2Shg, 6.0, 1.5e-4, 0.089, 0.0, 1.0 / dt_div);
        let c = synthesize_protocol(&run).unwrap();
        for (chi3, gp, bgp) in [(0.3, 4.0, 4.0), (0.5, 8.0, 8.5)] {
            let drive = pump_backout(&c.absorption, chi3, gp, bgp).unwrap();
            let recon = pump_roundtrip(&drive, &c.absorption, chi3);
            let lam = &c.absorption.combined;
            let max_l = lam.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            let max_e = lam
                .values
                .iter()
                .zip(recon.values.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            println!("c10: dt=1/{dt_div} chi3={chi3} gp={gp} rel_err={:.3e}", max_e / max_l);
        }
    }
}

fn c5() {
    let run = cfg(NonlinearityKind::Chi2Shg, 6.0, 0.0, 0.089, 0.0, 1.0 / 100.0);
    let c = synthesize_protocol(&run).unwrap();
    let grid = c.full_grid.clone();
    let xi = Wavepacket::gaussian(GaussianSpec::new(1.0, run.schedule.t_in), &grid);
    let terms = terms_for(&run.system.rates(run.tau_g));
    let t0 = Instant::now();
    let field = propagate_two_photon(&xi.signal, &c.combined, &run, &terms, false).unwrap();
    let mut worst = 0.0f64;
    for k in 0..grid.n_points {
        worst = worst.max((field.total(k) - 1.0).abs());
    }
    println!("c5: worst |sum P - 1| = {worst:.4e} t={:?}", t0.elapsed());
}

fn c4b() {
    let grid = [4.0, 6.0, 9.0, 13.0, 18.0, 24.0, 30.0, 38.0];
    for tau_e in [0.5, 0.25] {
        for (name, kind, x2, x3) in [
            ("chi2", NonlinearityKind::Chi2Shg, 0.089, 0.0),
            ("chi3", NonlinearityKind::Chi3, 0.0, 0.1),
        ] {
            for &g in &grid {
                let mut run = cfg(kind, g, 0.0, x2, x3, 1.0 / 400.0);
                run.schedule.tau_e = tau_e;
                match run_memory_single(&run) {
                    Ok((m, _)) => {
                        println!("c4b: tau_e={tau_e} {name} gamma={g:5.1} p_pass={:.6e}", m.p_pass)
                    }
                    Err(e) => println!("c4b: tau_e={tau_e} {name} gamma={g:5.1} ERROR {e}"),
                }
            }
        }
    }
}

fn c6b() {
    let run = oracle_run();
    let controls = synthesize_protocol(&run).unwrap();
    let grid = controls.full_grid.clone();
    let xi = Wavepacket::gaussian(GaussianSpec::new(1.0, run.schedule.t_in), &grid);
    let terms = terms_for(&run.system.rates(run.tau_g));
    let field = propagate_two_photon(&xi.signal, &controls.combined, &run, &terms, true).unwrap();
    let mat = field.xi_out.as_ref().unwrap();

    let n_bins = 128;
    let state = run_pair_bins(&xi.signal, &controls.combined.combined, &run, n_bins).unwrap();

    // Energy bookkeeping both ways.
    let mut bin_energy = 0.0;
    for k in 0..state.n {
        for j in 0..=k {
            bin_energy += state.pair_amp(j, k).norm_sqr();
        }
    }
    let span_dt = mat.dt;
    let mut mat_energy = 0.0;
    for k in 0..mat.n {
        for j in 0..k {
            mat_energy += 2.0 * mat.get(j, k).norm_sqr() * span_dt * span_dt;
        }
        mat_energy += mat.get(k, k).norm_sqr() * span_dt * span_dt;
    }
    println!("c6b: bin pair energy={bin_energy:.6} matrix double integral={mat_energy:.6}");

    // Print a sample of bin vs continuum values across the triangle.
    for (j, k) in [(20, 30), (20, 60), (20, 100), (40, 60), (40, 100), (60, 100), (100, 110), (110, 120)] {
        let t1 = state.t_center(j);
        let t2 = state.t_center(k);
        let b = state.xi_out(j, k);
        let m = {
            // bilinear sample by hand
            let x1 = (t1 - grid.t_start) / mat.dt;
            let x2 = (t2 - grid.t_start) / mat.dt;
            let (i1, i2) = (x1.floor() as usize, x2.floor() as usize);
            mat.get(i1, i2)
        };
        let ratio = if m.norm() > 1e-12 { b / m } else { C64::new(0.0, 0.0) };
        println!(
            "c6b: (j,k)=({j:2},{k:2}) t=({t1:6.3},{t2:6.3}) bin={b:?} mat={m:?} ratio={ratio:?}"
        );
    }
    // Where is the max error?
    let mut worst = (0.0, 0, 0);
    for k in 0..state.n {
        for j in 0..k {
            let x1 = ((state.t_center(j) - grid.t_start) / mat.dt).round() as usize;
            let x2 = ((state.t_center(k) - grid.t_start) / mat.dt).round() as usize;
            let d = (state.xi_out(j, k) - mat.get(x1.min(mat.n - 1), x2.min(mat.n - 1))).norm();
            if d > worst.0 {
                worst = (d, j, k);
            }
        }
    }
    println!(
        "c6b: worst={:.3e} at (j,k)=({},{}) t=({:.3},{:.3}) bin={:?}",
        worst.0,
        worst.1,
        worst.2,
        state.t_center(worst.1),
        state.t_center(worst.2),
        state.xi_out(worst.1, worst.2)
    );
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    for w in &which {
        match w.as_str() {
            "c1" => c1(),
            "c2" => c2(),
            "c3" => c3(),
            "c4" => c4(),
            "c5" => c5(),
            "c6" => c6(),
            "c7" => c7(),
            "c8" => c8(),
            "c8b" => c8b(),
            "c8c" => c8c(),
            "c8d" => c8d(),
            "c8e" => c8e(),
            "c8g" => c8g(),
            "c8h" => c8h(),
            "c8i" => c8i(),
            "c8j" => c8j(),
            "c8k" => c8k(),
            "c9" => c9(),
            "c10" => c10(),
            "c4b" => c4b(),
            "c6b" => c6b(),
            other => println!("unknown probe {other}"),
        }
    }
}

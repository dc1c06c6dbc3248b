//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! The field experiment itself is not reproducible, so acceptance rests on
//! the internally consistent reference tables plus properties checked
//! against the built-in physics-driven generator.

mod common;

use std::collections::HashSet;
use std::time::Instant;

use common::*;
use evshock::blast::{
    invert_charge, radius_uncertainty, velocity_from_scaled_distance, BlastConstants,
    UncertaintyBudget,
};
use evshock::calib::{
    accumulate_trigger_matrices, detect_led, estimate_projection, Correspondence, DltOptions,
};
use evshock::event::{polar_encode, polar_encode_par, BlastImagePoint, Event};
use evshock::front::{filter_roi_events, filter_roi_events_par, FrontConfig, RoiBand};
use evshock::geom::{self, aggregate_statistics};
use evshock::synth::{
    silhouette_image_point, simulate_events, ClutterSpec, EventLabel, LedMarkerSpec,
};
use nalgebra::Vector3;

fn check(n: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("ACCEPTANCE {n} [{name}]: PASS"),
        Err(msg) => {
            println!("ACCEPTANCE {n} [{name}]: FAIL - {msg}");
            panic!("acceptance criterion {n} failed: {msg}");
        }
    }
}

fn lcg(state: &mut u64) -> f64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn criterion_1_empirical_velocity_chain() {
    check(1, "empirical velocity chain", || {
        let constants = BlastConstants::default();
        let cbrt = 0.6f64.cbrt();
        for (r, expected) in [(4.0, 398.84), (6.0, 370.76), (8.0, 360.56)] {
            let v = velocity_from_scaled_distance(r / cbrt, &constants)
                .map_err(|e| e.to_string())?;
            let rel = ((v - expected) / expected).abs();
            if rel > 1e-3 {
                return Err(format!("r={r} m: v={v:.3} m/s vs {expected} ({rel:.2e} rel)"));
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_2_charge_inversion_regression() {
    check(2, "charge inversion regression", || {
        let constants = BlastConstants::default();
        for (r, v, grams) in [
            (4.0, 402.03, 657.46),
            (6.0, 373.38, 707.12),
            (8.0, 360.87, 620.48),
        ] {
            let est = invert_charge(r, v, &constants).map_err(|e| e.to_string())?;
            let got = est.w_kg * 1e3;
            let rel = ((got - grams) / grams).abs();
            if rel > 5e-3 {
                return Err(format!("r={r} v={v}: {got:.2} g vs {grams} g ({rel:.2e} rel)"));
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_3_forward_inverse_property() {
    check(3, "forward-inverse charge property", || {
        let constants = BlastConstants::default();
        let start = Instant::now();
        let mut s = 20_260_810u64;
        for i in 0..1000 {
            let w = 0.1 + 99.9 * lcg(&mut s);
            let r = 2.0 + 48.0 * lcg(&mut s);
            let v = velocity_from_scaled_distance(r / w.cbrt(), &constants)
                .map_err(|e| e.to_string())?;
            let est = invert_charge(r, v, &constants).map_err(|e| e.to_string())?;
            let rel = ((est.w_kg - w) / w).abs();
            if rel > 1e-6 {
                return Err(format!("case {i}: w={w} r={r}: rel error {rel:.2e}"));
            }
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() > 1.0 {
            return Err(format!("took {elapsed:?}, budget 1 s"));
        }
        Ok(())
    });
}

#[test]
fn criterion_4_end_to_end_synthetic_measurement() {
    check(4, "end-to-end synthetic measurement", || {
        let start = Instant::now();
        let cameras = reference_rig();
        let scene = reference_scene(23_000, ClutterSpec::off());
        let out = simulate_events(&scene, &cameras, 404).map_err(|e| e.to_string())?;
        let truth =
            evshock::synth::config::GroundTruthFile::from_truth(&out.truth);
        let constants = BlastConstants::default();

        let config = FrontConfig {
            window_fracs: (0.2, 0.92),
            ..FrontConfig::default()
        };
        let degree = 4;
        let mut all = Vec::new();
        for (view, (stream, cam)) in out.streams.iter().zip(&cameras).enumerate() {
            let geometry = view_geometry(cam);
            // Fit over the analysis range (4-8 m) with margin; the steep
            // near-detonation knee is not representable at low degree.
            all.extend(measure_view_trimmed(
                view,
                &stream.events,
                &geometry,
                &config,
                5.0,
                degree,
                (3.5, f64::INFINITY),
            ));
        }
        if all.len() < 100 {
            return Err(format!("only {} measurable (view, angle) series", all.len()));
        }

        // r(t) within 1% and v within 2% over the 4-8 m truth window.
        let mut worst_r = 0.0f64;
        let mut worst_v = 0.0f64;
        let mut eval_points = 0usize;
        for m in &all {
            let (t_lo, t_hi) = m.model.t_domain();
            let mut t = t_lo;
            while t <= t_hi {
                let tf = t as f64;
                if let Some(r_true) = truth.radius_at(t) {
                    if (4.0..=8.0).contains(&r_true) {
                        let r_fit = m.model.radius_at(tf).map_err(|e| e.to_string())?;
                        let v_fit = m.model.velocity_at(tf).map_err(|e| e.to_string())?;
                        let v_true = truth_velocity(0.6, r_true, &constants);
                        worst_r = worst_r.max(((r_fit - r_true) / r_true).abs());
                        worst_v = worst_v.max(((v_fit - v_true) / v_true).abs());
                        eval_points += 1;
                    }
                }
                t += 250;
            }
        }
        if eval_points < 1000 {
            return Err(format!("only {eval_points} evaluation points in the 4-8 m window"));
        }
        if worst_r > 0.01 {
            return Err(format!("radius error {worst_r:.4} exceeds 1%"));
        }
        if worst_v > 0.02 {
            return Err(format!("velocity error {worst_v:.4} exceeds 2%"));
        }

        // Charge inversion at 8 m from the mean of per-series velocities.
        let mut velocities = Vec::new();
        for m in &all {
            if let Some(t8) = m.model.time_at_radius(8.0) {
                if let Ok(v) = m.model.velocity_at(t8) {
                    velocities.push(v);
                }
            }
        }
        if velocities.len() < 30 {
            return Err(format!("only {} series reach 8 m", velocities.len()));
        }
        let stats = aggregate_statistics(&velocities).map_err(|e| e.to_string())?;
        let est = invert_charge(8.0, stats.mean, &constants).map_err(|e| e.to_string())?;
        let w_rel = ((est.w_kg - 0.6) / 0.6).abs();
        if w_rel > 0.05 {
            return Err(format!(
                "W = {:.1} g vs 600 g ({:.2}% off; v mean {:.2})",
                est.w_kg * 1e3,
                w_rel * 100.0,
                stats.mean
            ));
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() > 60.0 {
            return Err(format!("took {elapsed:?}, budget 60 s"));
        }
        println!(
            "  criterion 4 detail: {} series, worst r err {:.3}%, worst v err {:.3}%, W {:.1} g, {:.1} s",
            all.len(),
            worst_r * 100.0,
            worst_v * 100.0,
            est.w_kg * 1e3,
            elapsed.as_secs_f64()
        );
        Ok(())
    });
}

#[test]
fn criterion_5_clutter_robustness() {
    check(5, "clutter robustness", || {
        let start = Instant::now();
        let cameras = reference_rig();
        let scene = reference_scene(23_000, ClutterSpec::default());
        let out = simulate_events(&scene, &cameras, 505).map_err(|e| e.to_string())?;

        // Slope tolerance just above the curvature-induced drift over the
        // benchmark chords; noise acceptance near benchmark updates scales
        // with rho, so tight is robust here.
        let config = FrontConfig {
            rho: 0.08,
            dist_threshold: 30.0,
            ..FrontConfig::default()
        };
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut in_scope_front = 0u64;
        let mut measured_angles = 0usize;
        for (view, (stream, cam)) in out.streams.iter().zip(&cameras).enumerate() {
            let geometry = view_geometry(cam);
            let labels = label_map(stream, geometry.blast_image);
            let input_ts: HashSet<u64> = stream.events.iter().map(|e| e.t).collect();
            let polar = polar_encode(&stream.events, geometry.blast_image);
            let measured = measure_view(view, &stream.events, &geometry, &config, 5.0, 3);
            measured_angles += measured.len();
            for m in &measured {
                let (t1, t2, d1, d2) = m.roi_hull;
                let (a_lo, a_hi) = (m.alpha_center - 2.5, m.alpha_center + 2.5);
                // Denominator: front-labeled events inside the searched
                // region (the ROI hull of this angle).
                for pe in polar.iter().filter(|pe| pe.alpha >= a_lo && pe.alpha < a_hi) {
                    let t = pe.t as f64;
                    if t >= t1 && t <= t2 && pe.d >= d1 && pe.d <= d2 {
                        if labels.get(&polar_key(pe)) == Some(&EventLabel::Front) {
                            in_scope_front += 1;
                        }
                    }
                }
                for e in &m.accepted {
                    // Microsecond preservation: extracted timestamps are a
                    // subset of input timestamps.
                    if !input_ts.contains(&e.t) {
                        return Err(format!("fabricated timestamp {}", e.t));
                    }
                    match labels.get(&polar_key(e)) {
                        Some(EventLabel::Front) => tp += 1,
                        Some(_) => fp += 1,
                        None => return Err("extracted event not in the input stream".into()),
                    }
                }
            }
        }
        if measured_angles < 100 {
            return Err(format!("only {measured_angles} measurable angles"));
        }
        let precision = tp as f64 / (tp + fp).max(1) as f64;
        let recall = tp as f64 / in_scope_front.max(1) as f64;
        println!(
            "  criterion 5 detail: {measured_angles} angles, precision {:.4}, recall {:.4} ({} accepted)",
            precision,
            recall,
            tp + fp
        );
        if precision < 0.95 {
            return Err(format!("precision {precision:.4} below 0.95"));
        }
        if recall < 0.95 {
            return Err(format!("recall {recall:.4} below 0.95"));
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() > 120.0 {
            return Err(format!("took {elapsed:?}, budget 120 s"));
        }
        Ok(())
    });
}

#[test]
fn criterion_6_calibration() {
    check(6, "calibration", || {
        // LED detection on a simulated blink cloud.
        let cameras = reference_rig();
        let cam = &cameras[0];
        let led_world = Vector3::new(1.5, 2.0, 0.8);
        let mut scene = reference_scene(6_000, ClutterSpec::off());
        scene.render_front = false;
        scene.leds.push(LedMarkerSpec {
            world: led_world,
            period_us: 1000,
            duty: 0.5,
            brightness: 1.0,
        });
        let out = simulate_events(&scene, &[cam.clone()], 606).map_err(|e| e.to_string())?;
        let stream = &out.streams[0];
        let matrices =
            accumulate_trigger_matrices(&stream.events, cam.width, cam.height, (0, 1000));
        let detection = detect_led(&matrices, 5).map_err(|e| e.to_string())?;
        let (tx, ty) = cam.model.project(&led_world).unwrap();
        let err = (detection.refined.0 - tx).hypot(detection.refined.1 - ty);
        if err > 0.5 {
            return Err(format!("LED detection error {err:.3} px exceeds 0.5 px"));
        }

        // Reprojection with 0.3 px image noise stays at reference-table
        // order (0.34-0.38 px).
        let world_points = [
            Vector3::new(0.0, 0.0, 1.5),
            Vector3::new(2.0, 1.0, 0.4),
            Vector3::new(-1.5, 2.0, 2.2),
            Vector3::new(1.0, -2.0, 1.0),
            Vector3::new(-2.0, -1.0, 3.0),
            Vector3::new(3.0, 2.5, 2.8),
            Vector3::new(-3.0, 1.5, 0.2),
            Vector3::new(0.5, 3.0, 3.5),
            Vector3::new(2.5, -1.5, 2.0),
            Vector3::new(-1.0, -3.0, 0.8),
        ];
        let mut s = 77u64;
        let corrs: Vec<Correspondence> = world_points
            .iter()
            .map(|w| {
                let (x, y) = cam.model.project(w).unwrap();
                Correspondence {
                    image: (
                        x + 0.3 * (2.0 * lcg(&mut s) - 1.0),
                        y + 0.3 * (2.0 * lcg(&mut s) - 1.0),
                    ),
                    world: *w,
                }
            })
            .collect();
        let model = estimate_projection(&corrs, &DltOptions::default()).map_err(|e| e.to_string())?;
        if model.reproj_error > 0.5 {
            return Err(format!(
                "reprojection RMS {:.3} px exceeds 0.5 px",
                model.reproj_error
            ));
        }
        println!(
            "  criterion 6 detail: LED error {err:.3} px, reprojection RMS {:.3} px",
            model.reproj_error
        );
        Ok(())
    });
}

#[test]
fn criterion_7_reconstruction_exactness() {
    check(7, "reconstruction exactness", || {
        let cameras = reference_rig();
        for cam in &cameras {
            let geometry = view_geometry(cam);
            for r in [1.0, 3.0, 5.0, 7.5, 9.0] {
                for alpha in [0.0, 41.0, 90.0, 137.0, 200.0, 318.0] {
                    let (image, _) = silhouette_image_point(&geometry, r, alpha)
                        .map_err(|e| e.to_string())?;
                    let p = geom::reconstruct_point(&geometry, r, image)
                        .map_err(|e| e.to_string())?;
                    let (px, py) = geom::project_point(&geometry.camera.gamma, &p.world)
                        .map_err(|e| e.to_string())?;
                    let reproj = (px - image.0).hypot(py - image.1);
                    if reproj > 1e-6 {
                        return Err(format!("reprojection residual {reproj:.2e} px"));
                    }
                    let sphere_rel = p.sphere_residual / r;
                    if sphere_rel > 1e-9 {
                        return Err(format!("|X-B| off by {sphere_rel:.2e} relative"));
                    }
                    if p.tangency_residual.abs() > 1e-9 {
                        return Err(format!(
                            "tangency residual {:.2e} m^2",
                            p.tangency_residual
                        ));
                    }
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_8_uncertainty_containment() {
    check(8, "uncertainty containment", || {
        let cameras = reference_rig();
        let geometry = view_geometry(&cameras[0]);
        let budget = UncertaintyBudget::reference();
        let mut s = 808u64;
        let mut checked = 0usize;
        for (dx, dy) in [(180.0, 40.0), (320.0, -120.0), (90.0, 160.0), (420.0, 10.0)] {
            let a = (geometry.blast_image.x + dx, geometry.blast_image.y + dy);
            let iv = radius_uncertainty(&geometry, a, &budget).map_err(|e| e.to_string())?;
            for _ in 0..2500 {
                let df = budget.eps_f * (2.0 * lcg(&mut s) - 1.0);
                let dxo = budget.eps_xo * (2.0 * lcg(&mut s) - 1.0);
                let dyo = budget.eps_yo * (2.0 * lcg(&mut s) - 1.0);
                let dax = budget.eps_a * (2.0 * lcg(&mut s) - 1.0);
                let day = budget.eps_a * (2.0 * lcg(&mut s) - 1.0);
                let dpx = budget.eps_pi * (2.0 * lcg(&mut s) - 1.0);
                let dpy = budget.eps_pi * (2.0 * lcg(&mut s) - 1.0);
                let dz = budget.eps_zeta * (2.0 * lcg(&mut s) - 1.0);
                let f = geometry.camera.f + df;
                let (xo, yo) = (
                    geometry.camera.principal.0 + dxo,
                    geometry.camera.principal.1 + dyo,
                );
                let (xa, ya) = (a.0 + dax + dpx, a.1 + day + dpy);
                let (xb, yb) = (geometry.blast_image.x + dpx, geometry.blast_image.y + dpy);
                let ca = ((xo - xa).powi(2) + (yo - ya).powi(2) + f * f).sqrt();
                let cb = ((xo - xb).powi(2) + (yo - yb).powi(2) + f * f).sqrt();
                let ab = (xa - xb).hypot(ya - yb);
                let theta = (((ca * ca + cb * cb - ab * ab) / (2.0 * ca * cb))
                    .clamp(-1.0, 1.0))
                .acos();
                let r = (geometry.zeta + dz) * theta.sin();
                if r < iv.r_lo - 1e-12 || r > iv.r_hi + 1e-12 {
                    return Err(format!(
                        "perturbed radius {r} escapes [{}, {}] at point ({dx},{dy})",
                        iv.r_lo, iv.r_hi
                    ));
                }
                checked += 1;
            }
        }
        if checked != 10_000 {
            return Err(format!("expected 10000 draws, ran {checked}"));
        }
        Ok(())
    });
}

#[test]
fn criterion_9_throughput_and_determinism() {
    check(9, "throughput and determinism", || {
        // One million synthetic events spread over the sensor and 100 ms.
        let mut s = 909u64;
        let events: Vec<Event> = (0..1_000_000u64)
            .map(|i| {
                let x = (lcg(&mut s) * 1280.0) as u16;
                let y = (lcg(&mut s) * 720.0) as u16;
                Event {
                    x,
                    y,
                    p: if i % 2 == 0 { 1 } else { -1 },
                    t: i / 10,
                }
            })
            .collect();
        let blast = BlastImagePoint::new(640.0, 360.0);
        let band = RoiBand {
            t1: 10_000.0,
            d1: 120.0,
            t2: 90_000.0,
            d2: 420.0,
            q_prime: 25.0,
            epsilon: 0.0,
            tolerance: 3.0,
            kappa: 0.01,
        };

        let start = Instant::now();
        let polar = polar_encode(&events, blast);
        let filtered = filter_roi_events(&polar, &band);
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() >= 2.0 {
            return Err(format!("single-worker encode+filter took {elapsed:?}, budget 2 s"));
        }

        for workers in [1, 4, 8] {
            let polar_w = polar_encode_par(&events, blast, workers);
            if polar_w != polar {
                return Err(format!("polar encoding differs with {workers} workers"));
            }
            let filtered_w = filter_roi_events_par(&polar_w, &band, workers);
            if filtered_w != filtered {
                return Err(format!("ROI filtering differs with {workers} workers"));
            }
        }
        println!(
            "  criterion 9 detail: encode+filter of 1e6 events in {:.3} s ({} in band)",
            elapsed.as_secs_f64(),
            filtered.len()
        );
        Ok(())
    });
}

use super::*;
use crate::geo::destination_point;
use crate::ingest::Category;
use crate::routing::{Route, StreetGraph, SyntheticBackend};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn p(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

fn amenity(name: &str, point: GeoPoint, weight: u32) -> AmenityOrigin {
    AmenityOrigin::new(name, Category::Retail, point, weight)
}

fn dest(id: usize, point: GeoPoint) -> GridDestination {
    GridDestination { id, point }
}

fn pair(o: GeoPoint, d: GeoPoint) -> CandidatePair {
    CandidatePair {
        origin_id: 0,
        origin_name: "o".into(),
        origin: o,
        dest_id: 0,
        destination: d,
        euclidean_km: haversine_distance(&o, &d, &EarthModel::default()),
    }
}

/// Great-circle distance through the 3-D chord; independent of the haversine path.
fn chord_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let v = |q: &GeoPoint| {
        let (la, lo) = (q.lat().to_radians(), q.lon().to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (u, w) = (v(a), v(b));
    let chord = ((u[0] - w[0]).powi(2) + (u[1] - w[1]).powi(2) + (u[2] - w[2]).powi(2)).sqrt();
    2.0 * crate::geo::EARTH_RADIUS_KM * (chord / 2.0).asin()
}

/// Backend returning the great circle plus a fixed detour per destination.
struct DetourBackend(Vec<(GeoPoint, f64)>);

impl RoutingBackend for DetourBackend {
    fn route(&self, r: &RouteRequest) -> Result<Route, RouteError> {
        let detour = self
            .0
            .iter()
            .find(|(d, _)| *d == r.destination)
            .map(|(_, km)| *km)
            .ok_or_else(|| RouteError::NoRoute("unknown destination".into()))?;
        let km = haversine_distance(&r.origin, &r.destination, &EarthModel::default()) + detour;
        Ok(Route::from_points(km, [r.origin, r.destination]))
    }
}

struct Failing;

impl RoutingBackend for Failing {
    fn route(&self, _: &RouteRequest) -> Result<Route, RouteError> {
        Err(RouteError::Transport("connection refused after 3 attempts".into()))
    }
}

#[test]
fn params_validation() {
    assert!(AnalysisParams::default().validate().is_ok());
    let bad = AnalysisParams {
        annulus_min_km: 2.0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = AnalysisParams {
        top_k: 0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn single_pair_in_annulus() {
    let e = EarthModel::default();
    let o = p(53.35, -6.26);
    let d = destination_point(&o, 45.0, 1.7, &e).unwrap();
    let pairs = pair_candidates(&[amenity("a", o, 1)], &[dest(0, d)], &AnalysisParams::default());
    assert_eq!(pairs.len(), 1);
    assert!((pairs[0].euclidean_km - 1.7).abs() < 1e-9);
}

#[test]
fn pairs_outside_annulus_excluded() {
    let e = EarthModel::default();
    let o = p(53.35, -6.26);
    let near = destination_point(&o, 10.0, 0.5, &e).unwrap();
    let far = destination_point(&o, 200.0, 3.0, &e).unwrap();
    let pairs = pair_candidates(
        &[amenity("a", o, 1)],
        &[dest(0, near), dest(1, far)],
        &AnalysisParams::default(),
    );
    assert!(pairs.is_empty());
}

#[test]
fn pairing_matches_exhaustive_scan() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let origins: Vec<_> = (0..10)
        .map(|i| {
            amenity(
                &format!("o{i}"),
                p(rng.random_range(53.30..53.40), rng.random_range(-6.35..-6.15)),
                1,
            )
        })
        .collect();
    let dests: Vec<_> = (0..100)
        .map(|i| dest(i, p(rng.random_range(53.30..53.40), rng.random_range(-6.35..-6.15))))
        .collect();
    let params = AnalysisParams::default();
    let got: Vec<_> = pair_candidates(&origins, &dests, &params)
        .iter()
        .map(|c| (c.origin_id, c.dest_id))
        .collect();
    let mut want = Vec::new();
    for (oi, o) in origins.iter().enumerate() {
        for d in &dests {
            let km = chord_distance(&o.point, &d.point);
            assert!((km - 1.5).abs() > 1e-9 && (km - 2.0).abs() > 1e-9, "borderline fixture");
            if km > 1.5 && km <= 2.0 {
                want.push((oi, d.id));
            }
        }
    }
    assert!(!want.is_empty());
    assert_eq!(got, want);
}

#[test]
fn straight_street_has_no_discrepancy() {
    let g = StreetGraph::lattice(p(0.0, 0.0), 1, 5, 0.5);
    let backend = SyntheticBackend::new(g.clone());
    let report = compute_discrepancies(&[pair(g.nodes()[0], g.nodes()[4])], &backend, 2).unwrap();
    assert_eq!(report.routed.len(), 1);
    assert!(report.routed[0].discrepancy_km.abs() < 1e-9);
}

#[test]
fn barrier_forces_two_edge_detour() {
    let mut g = StreetGraph::lattice(p(0.0, 0.0), 3, 6, 0.5);
    g.remove_edge(1, 2).unwrap();
    let backend = SyntheticBackend::new(g.clone());
    let report = compute_discrepancies(&[pair(g.nodes()[0], g.nodes()[4])], &backend, 1).unwrap();
    let r = &report.routed[0];
    assert!((r.pair.euclidean_km - 2.0).abs() < 1e-9);
    assert!((r.discrepancy_km - 1.0).abs() < 1e-6, "{}", r.discrepancy_km);
    assert_eq!(r.waypoints.len(), 7);
}

#[test]
fn disconnected_pair_is_unrouted_data() {
    let mut g = StreetGraph::lattice(p(0.0, 0.0), 2, 4, 0.5);
    g.remove_edge(1, 2).unwrap();
    g.remove_edge(5, 6).unwrap();
    let backend = SyntheticBackend::new(g.clone());
    let pairs = vec![pair(g.nodes()[0], g.nodes()[3]), pair(g.nodes()[0], g.nodes()[5])];
    let report = compute_discrepancies(&pairs, &backend, 4).unwrap();
    assert_eq!(report.routed.len(), 1);
    assert_eq!(report.unrouted.len(), 1);
    assert_eq!(report.unrouted[0].pair.destination, g.nodes()[3]);
}

#[test]
fn transport_errors_propagate() {
    let res = compute_discrepancies(&[pair(p(0.0, 0.0), p(0.0, 0.01))], &Failing, 3);
    assert!(matches!(res, Err(AnalysisError::Routing(RouteError::Transport(_)))));
}

#[test]
fn undercutting_routes_are_rejected() {
    struct Teleport;
    impl RoutingBackend for Teleport {
        fn route(&self, r: &RouteRequest) -> Result<Route, RouteError> {
            Ok(Route::from_points(0.1, [r.origin, r.destination]))
        }
    }
    let report = compute_discrepancies(&[pair(p(0.0, 0.0), p(0.0, 0.01))], &Teleport, 1).unwrap();
    assert!(report.routed.is_empty());
    assert_eq!(report.rejected.len(), 1);
}

#[test]
fn parallel_output_order_is_deterministic() {
    let g = StreetGraph::lattice(p(53.33, -6.30), 12, 12, 0.3).with_random_barriers(15, 9);
    let backend = SyntheticBackend::new(g.clone());
    let origins: Vec<_> = [30usize, 77, 100]
        .iter()
        .map(|&i| amenity(&format!("n{i}"), g.nodes()[i], 2))
        .collect();
    let dests: Vec<_> = g.nodes().iter().enumerate().map(|(i, &q)| dest(i, q)).collect();
    let params = AnalysisParams {
        annulus_min_km: 0.5,
        annulus_max_km: 2.5,
        ..Default::default()
    };
    let pairs = pair_candidates(&origins, &dests, &params);
    let serial = compute_discrepancies(&pairs, &backend, 1).unwrap();
    let parallel = compute_discrepancies(&pairs, &backend, 8).unwrap();
    assert_eq!(serial, parallel);
    assert!(serial
        .routed
        .iter()
        .all(|r| r.discrepancy_km >= -DISCREPANCY_TOLERANCE_KM));
}

fn routed(origin_id: usize, dest_id: usize, discrepancy_km: f64) -> RoutedPair {
    RoutedPair {
        pair: CandidatePair {
            origin_id,
            origin_name: format!("o{origin_id}"),
            origin: p(0.0, 0.0),
            dest_id,
            destination: p(0.0, 0.01),
            euclidean_km: 1.0,
        },
        footpath_km: 1.0 + discrepancy_km,
        discrepancy_km,
        waypoints: vec![],
    }
}

#[test]
fn top_k_fewer_than_k() {
    let r = vec![routed(0, 0, 1.0), routed(0, 1, 2.0), routed(0, 2, 0.5)];
    assert_eq!(top_k_per_origin(&r, 5).len(), 3);
}

#[test]
fn top_k_selects_largest() {
    let r: Vec<_> = [4.0, 1.0, 3.0, 2.0, 5.0]
        .iter()
        .enumerate()
        .map(|(i, &d)| routed(0, i, d))
        .collect();
    let top = top_k_per_origin(&r, 2);
    assert_eq!(top.iter().map(|t| t.discrepancy_km).collect::<Vec<_>>(), vec![5.0, 4.0]);
}

#[test]
fn top_k_ties_prefer_smaller_dest() {
    let r = vec![routed(0, 9, 1.0), routed(0, 3, 1.0), routed(0, 5, 1.0)];
    let top = top_k_per_origin(&r, 2);
    assert_eq!(top.iter().map(|t| t.pair.dest_id).collect::<Vec<_>>(), vec![3, 5]);
}

#[test]
fn top_k_matches_sort_oracle() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let mut all = Vec::new();
    for o in (0..50).rev() {
        for d in 0..20 {
            // quantized so ties occur
            all.push(routed(o, d, (rng.random_range(0.0..5.0f64) * 4.0).round() / 4.0));
        }
    }
    let got = top_k_per_origin(&all, 5);
    let mut want = Vec::new();
    for o in 0..50 {
        let mut mine: Vec<_> = all.iter().filter(|r| r.pair.origin_id == o).cloned().collect();
        // stable sort by dest, then stable sort by descending discrepancy
        mine.sort_by_key(|r| r.pair.dest_id);
        mine.sort_by(|a, b| b.discrepancy_km.partial_cmp(&a.discrepancy_km).unwrap());
        want.extend(mine.into_iter().take(5));
    }
    assert_eq!(got, want);
    assert!(got.len() <= 5 * 50);
}

#[test]
fn score_on_straight_street_is_zero() {
    let g = StreetGraph::lattice(p(0.0, 0.0), 1, 5, 0.5);
    let backend = SyntheticBackend::new(g.clone());
    let origins = [amenity("shop", g.nodes()[1], 1)];
    let s = unwalkability_score(
        &g.nodes()[0],
        &origins,
        &backend,
        &AnalysisParams::default(),
        Aggregation::Mean,
    )
    .unwrap();
    assert!(s.abs() < 1e-9);
}

#[test]
fn score_behind_barrier_is_detour() {
    let mut g = StreetGraph::lattice(p(0.0, 0.0), 5, 5, 0.5);
    for r in 0..3 {
        g.remove_edge(r * 5 + 1, r * 5 + 2).unwrap();
    }
    let backend = SyntheticBackend::new(g.clone());
    let origins = [amenity("school", g.nodes()[3], 1)];
    let s = unwalkability_score(
        &g.nodes()[1],
        &origins,
        &backend,
        &AnalysisParams::default(),
        Aggregation::Mean,
    )
    .unwrap();
    assert!((s - 3.0).abs() < 1e-6, "{s}");
}

#[test]
fn score_aggregations() {
    let e = EarthModel::default();
    let home = p(53.35, -6.26);
    let a = destination_point(&home, 0.0, 0.8, &e).unwrap();
    let b = destination_point(&home, 90.0, 1.2, &e).unwrap();
    let far = destination_point(&home, 180.0, 5.0, &e).unwrap();
    let backend = DetourBackend(vec![(a, 1.0), (b, 3.0), (far, 10.0)]);
    let origins = [amenity("a", a, 1), amenity("b", b, 3), amenity("far", far, 1)];
    let params = AnalysisParams::default();
    let score = |agg| unwalkability_score(&home, &origins, &backend, &params, agg).unwrap();
    assert!((score(Aggregation::Mean) - 2.0).abs() < 1e-9);
    assert!((score(Aggregation::Max) - 3.0).abs() < 1e-9);
    assert!((score(Aggregation::ImportanceWeighted) - 2.5).abs() < 1e-9);
}

#[test]
fn score_without_coverage_fails() {
    let backend = DetourBackend(vec![]);
    let origins = [amenity("far", p(54.0, -6.0), 1)];
    let res = unwalkability_score(
        &p(53.0, -6.0),
        &origins,
        &backend,
        &AnalysisParams::default(),
        Aggregation::Mean,
    );
    assert!(matches!(res, Err(AnalysisError::NoCoverage(_))));
    let near = [amenity("unreachable", p(53.001, -6.0), 1)];
    let res = unwalkability_score(
        &p(53.0, -6.0),
        &near,
        &backend,
        &AnalysisParams::default(),
        Aggregation::Mean,
    );
    assert!(matches!(res, Err(AnalysisError::NoCoverage(_))));
}

#[test]
fn routed_csv_round_trip() {
    let g = StreetGraph::lattice(p(53.3, -6.3), 3, 6, 0.5).with_random_barriers(2, 5);
    let backend = SyntheticBackend::new(g.clone());
    let report = compute_discrepancies(&[pair(g.nodes()[0], g.nodes()[17])], &backend, 1).unwrap();
    let mut buf = Vec::new();
    write_routed_csv(&mut buf, &report.routed).unwrap();
    let back = read_routed_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].waypoints.len(), report.routed[0].waypoints.len());
    assert!((back[0].discrepancy_km - report.routed[0].discrepancy_km).abs() < 5e-4);
    let mut again = Vec::new();
    write_routed_csv(&mut again, &back).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn waypoint_encoding() {
    let w = vec![
        Waypoint {
            label: 0,
            point: p(53.344, -6.259),
        },
        Waypoint {
            label: 1,
            point: p(53.35, -6.23),
        },
    ];
    let s = encode_waypoints(&w);
    assert_eq!(s, "0:53.344000:-6.259000;1:53.350000:-6.230000");
    assert_eq!(decode_waypoints(&s).unwrap(), w);
    assert!(decode_waypoints("0:1").is_err());
    assert!(decode_waypoints("").unwrap().is_empty());
}

proptest! {
    #[test]
    fn pairing_ignores_input_order(seed in 0u64..1000) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let origins: Vec<_> = (0..4)
            .map(|i| amenity(&format!("o{i}"), p(rng.random_range(53.30..53.36), rng.random_range(-6.30..-6.22)), 1))
            .collect();
        let dests: Vec<_> = (0..30)
            .map(|i| dest(i, p(rng.random_range(53.30..53.36), rng.random_range(-6.30..-6.22))))
            .collect();
        let params = AnalysisParams::default();
        let key = |c: &CandidatePair| (c.origin_name.clone(), c.dest_id);
        let mut a: Vec<_> = pair_candidates(&origins, &dests, &params).iter().map(key).collect();
        let mut ro = origins.clone();
        ro.reverse();
        let mut rd = dests.clone();
        rd.reverse();
        let mut b: Vec<_> = pair_candidates(&ro, &rd, &params).iter().map(key).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn max_aggregation_dominates_mean(detours in proptest::collection::vec(0.0f64..5.0, 1..6)) {
        let e = EarthModel::default();
        let home = p(53.35, -6.26);
        let pts: Vec<_> = (0..detours.len())
            .map(|i| destination_point(&home, i as f64 * 50.0, 0.3 + i as f64 * 0.2, &e).unwrap())
            .collect();
        let backend = DetourBackend(pts.iter().copied().zip(detours.iter().copied()).collect());
        let origins: Vec<_> = pts.iter().map(|&q| amenity("x", q, 1)).collect();
        let params = AnalysisParams::default();
        let mean = unwalkability_score(&home, &origins, &backend, &params, Aggregation::Mean).unwrap();
        let max = unwalkability_score(&home, &origins, &backend, &params, Aggregation::Max).unwrap();
        prop_assert!(max >= mean - 1e-12);
    }
}

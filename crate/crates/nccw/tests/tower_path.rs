//! Path lifting through connector maps: endpoint handling, exact
//! projection audit, stop discipline, and the in-stage path builder.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nccw::dyadic::Dyadic;
use nccw::tower::connector::SpecPoint;
use nccw::tower::path::{
    connect_points, fiber_points, lift_path, random_path, validate_path, DyadicPath, LiftOptions,
    PathToken, Segment,
};
use nccw::tower::presets::{conn_tower, small_path_tower};
use nccw::tower::{BlockClass, YOrigin};

fn find_block_slot(
    tower: &nccw::tower::Tower,
    level: usize,
    class: BlockClass,
    over: u32,
) -> Option<u32> {
    let upper = tower.stage(level + 1);
    (0..upper.num_y() as u32).find(|&y| match upper.y_origin[y as usize] {
        YOrigin::Block { block, y: ly } => {
            upper.blocks[block as usize].class == class && ly == over
        }
        _ => false,
    })
}

#[test]
fn lift_stay_at_half_with_matching_endpoints_is_constant_ish() {
    let tower = small_path_tower(2).unwrap();
    let conn = tower.connector(1);
    let base_edge = 0u32;
    let base = DyadicPath {
        tokens: vec![PathToken {
            y: base_edge,
            seg: Segment::Stay(Dyadic::HALF),
        }],
        p3_start: false,
        p3_end: false,
        closure: false,
    };
    // the halfway vertex of the lower edge inside the first distinguished
    // summand
    let lift = conn
        .ecopy_vertex(0, base_edge)
        .map(|x| SpecPoint::Vertex { x })
        .unwrap();
    let out = lift_path(&conn, &base, lift, lift, &LiftOptions::default()).unwrap();
    assert_eq!(out.path.start_point(conn.upper), lift);
    assert_eq!(out.path.end_point(conn.upper), lift);
    // everything projects back onto the halfway point
    for tok in &out.path.tokens {
        let p = conn.project(conn.upper.point(tok.y, tok.seg.start()));
        assert_eq!(
            p,
            SpecPoint::Interior {
                y: base_edge,
                t: Dyadic::HALF
            }
        );
    }
}

#[test]
fn lift_through_lower_half_map_doubles_values() {
    // base MOVE(0 -> 1/2): lift through the lower-half block is a full
    // traversal MOVE(0 -> 1)
    let tower = small_path_tower(2).unwrap();
    let conn = tower.connector(1);
    let base_edge = 0u32;
    let mut tokens = Vec::new();
    tokens.push(PathToken {
        y: base_edge,
        seg: Segment::Stay(Dyadic::ZERO),
    });
    tokens.push(PathToken {
        y: base_edge,
        seg: Segment::Move {
            from: Dyadic::ZERO,
            to: Dyadic::HALF,
        },
    });
    tokens.push(PathToken {
        y: base_edge,
        seg: Segment::Stay(Dyadic::HALF),
    });
    let base = DyadicPath {
        tokens,
        p3_start: false,
        p3_end: false,
        closure: false,
    };
    validate_path(conn.lower, &base).unwrap();
    let slot = find_block_slot(&tower, 1, BlockClass::PlusLower, base_edge).unwrap();
    let lift0 = conn.upper.point(slot, Dyadic::ZERO);
    let lift1 = conn.upper.point(slot, Dyadic::ONE);
    let out = lift_path(&conn, &base, lift0, lift1, &LiftOptions::default()).unwrap();
    assert_eq!(out.path.start_point(conn.upper), lift0);
    assert_eq!(out.path.end_point(conn.upper), lift1);
    // the moving tokens traverse one upper edge completely: the halved
    // parameter runs 0 -> 1 while the base runs 0 -> 1/2
    let moves: Vec<&PathToken> = out
        .path
        .tokens
        .iter()
        .filter(|t| matches!(t.seg, Segment::Move { .. }))
        .collect();
    assert!(!moves.is_empty());
    let edge = moves[0].y;
    assert!(moves.iter().all(|t| t.y == edge));
    assert_eq!(moves.first().unwrap().seg.start(), Dyadic::ZERO);
    assert_eq!(moves.last().unwrap().seg.end(), Dyadic::ONE);
}

#[test]
fn lift_bridges_distinct_halfway_vertices() {
    // base = STAY(1/2) between the two halfway copies: the lift traverses
    // the embedded edge from one to the other
    let tower = small_path_tower(2).unwrap();
    let conn = tower.connector(1);
    let base_edge = 0u32;
    let base = DyadicPath {
        tokens: vec![PathToken {
            y: base_edge,
            seg: Segment::Stay(Dyadic::HALF),
        }],
        p3_start: false,
        p3_end: false,
        closure: false,
    };
    let v0 = conn.ecopy_vertex(0, base_edge).unwrap();
    let v1 = conn.ecopy_vertex(1, base_edge).unwrap();
    let out = lift_path(
        &conn,
        &base,
        SpecPoint::Vertex { x: v0 },
        SpecPoint::Vertex { x: v1 },
        &LiftOptions::default(),
    )
    .unwrap();
    assert_eq!(out.path.start_point(conn.upper), SpecPoint::Vertex { x: v0 });
    assert_eq!(out.path.end_point(conn.upper), SpecPoint::Vertex { x: v1 });
    // and an avoided route must fail or find another way: block the
    // embedded edge's other end first
    let opts = LiftOptions {
        avoid: Some(SpecPoint::Vertex { x: v1 }),
    };
    assert!(lift_path(&conn, &base, SpecPoint::Vertex { x: v0 }, SpecPoint::Vertex { x: v1 }, &opts).is_err());
}

#[test]
fn connect_points_on_conn_stage_one() {
    // [0, x_next] connects to [0, x] through the embedded cycle edge
    let tower = conn_tower(1, true).unwrap();
    let stage = tower.stage(1);
    let a = SpecPoint::Vertex { x: 1 };
    let b = SpecPoint::Vertex { x: 0 };
    let path = connect_points(stage, a, b).unwrap();
    assert_eq!(path.start_point(stage), a);
    assert_eq!(path.end_point(stage), b);
    // trivial case
    let constant = connect_points(stage, a, a).unwrap();
    assert!(constant.is_constant());
}

#[test]
fn connect_points_random_pairs_levels() {
    let tower = conn_tower(4, true).unwrap();
    let mut rng = StdRng::seed_from_u64(97);
    for level in 1..=4 {
        let stage = tower.stage(level);
        for _ in 0..20 {
            let x1 = rng.gen_range(0..stage.num_x()) as u32;
            let x2 = rng.gen_range(0..stage.num_x()) as u32;
            let path = connect_points(
                stage,
                SpecPoint::Vertex { x: x1 },
                SpecPoint::Vertex { x: x2 },
            )
            .unwrap();
            validate_path(stage, &path).unwrap();
            assert_eq!(path.start_point(stage), SpecPoint::Vertex { x: x1 });
            assert_eq!(path.end_point(stage), SpecPoint::Vertex { x: x2 });
        }
    }
}

#[test]
fn random_lifts_small_tower() {
    let tower = small_path_tower(4).unwrap();
    let mut rng = StdRng::seed_from_u64(12345);
    for level in 1..=3 {
        let conn = tower.connector(level);
        for trial in 0..60 {
            let base = random_path(conn.lower, &mut rng, 4);
            validate_path(conn.lower, &base).unwrap();
            let starts = fiber_points(&conn, base.start_point(conn.lower));
            let ends = fiber_points(&conn, base.end_point(conn.lower));
            assert!(!starts.is_empty() && !ends.is_empty());
            let lift0 = starts[rng.gen_range(0..starts.len())];
            let lift1 = ends[rng.gen_range(0..ends.len())];
            let out = lift_path(&conn, &base, lift0, lift1, &LiftOptions::default())
                .unwrap_or_else(|e| panic!("level {level} trial {trial}: {e}"));
            assert_eq!(out.path.start_point(conn.upper), lift0);
            assert_eq!(out.path.end_point(conn.upper), lift1);
            validate_path(conn.upper, &out.path).unwrap();
        }
    }
}

//! Construction-level checks of the tower machinery: level-1 twists, stage
//! integrity, connector commutation, connectivity, and slot arithmetic.

use nccw::dyadic::Dyadic;
use nccw::model::NccwData;
use nccw::spectrum::analyze;
use nccw::tower::census::verify_slot_arithmetic;
use nccw::tower::connector::SpecPoint;
use nccw::tower::presets::{
    build_tower, conn_spec_for, conn_tower, nop_tower, small_path_tower, spec_b_gen, spl_tower,
};
use nccw::tower::{BaseKind, ConnectorSpec, Flavor, TowerFamilySpec, UNDEF};

#[test]
fn level1_cycle_follows_the_global_enumeration() {
    // A seed with three vertices in total: the embedded copy's target map
    // is the 3-cycle x_l -> x_{l-1} with wraparound.
    let seed = NccwData::with_canonical_layout(
        vec![3],
        vec![1, 1, 1],
        [vec![vec![1, 1, 1]], vec![vec![1, 1, 1]]],
    );
    let family = TowerFamilySpec::plain(BaseKind::Conn, Flavor::Unital);
    let stage = nccw::tower::build::build_level1(&seed, &family, Some(0)).unwrap();
    let y0 = stage.meta.embedded_y0.unwrap() as usize;
    // b0 restricted to the embedded copy is the identity onto X
    for x in 0..3u32 {
        assert_eq!(stage.b[0][y0 + x as usize], x);
    }
    // b1: x_1 -> x_0, x_2 -> x_1, x_0 -> x_2 (zero-based wrap)
    assert_eq!(stage.b[1][y0 + 1], 0);
    assert_eq!(stage.b[1][y0 + 2], 1);
    assert_eq!(stage.b[1][y0], 2);
    stage.check_integrity().unwrap();
}

#[test]
fn conn_tower_connectivity() {
    // two independent summands: connected at every level with the
    // distinguished block, two components at level 1 without it
    let tower = conn_tower(5, true).unwrap();
    for level in 1..=5 {
        let g = spec_b_gen(tower.stage(level));
        let a = analyze(&g);
        assert_eq!(a.pi0, 1, "level {level} disconnected");
    }
    let bare = conn_tower(1, false).unwrap();
    let g = spec_b_gen(bare.stage(1));
    assert_eq!(analyze(&g).pi0, 2);
}

#[test]
fn conn_tower_commutation_and_integrity() {
    let tower = conn_tower(4, true).unwrap();
    for level in 1..=4 {
        tower.stage(level).check_integrity().unwrap();
        verify_slot_arithmetic(tower.stage(level)).unwrap();
    }
    for level in 1..4 {
        tower.connector(level).verify_commutation().unwrap();
    }
}

#[test]
fn small_path_tower_builds_and_commutes() {
    let tower = small_path_tower(4).unwrap();
    for level in 1..=4 {
        tower.stage(level).check_integrity().unwrap();
        verify_slot_arithmetic(tower.stage(level)).unwrap();
        let g = spec_b_gen(tower.stage(level));
        assert_eq!(analyze(&g).pi0, 1, "path stage {level} disconnected");
    }
    for level in 1..4 {
        tower.connector(level).verify_commutation().unwrap();
    }
}

#[test]
fn spl_tower_builds_with_free_ends_in_one_block() {
    let tower = spl_tower(4).unwrap();
    for level in 1..=4 {
        let stage = tower.stage(level);
        stage.check_integrity().unwrap();
        let grave = stage.meta.grave.expect("grave block");
        for y in 0..stage.num_y() {
            if stage.b[1][y] == UNDEF {
                assert_eq!(stage.y_p[y], grave);
            }
            assert_ne!(stage.b[0][y], UNDEF, "source map must be total");
        }
        let g = spec_b_gen(stage);
        assert_eq!(analyze(&g).pi0, 1);
    }
    for level in 1..4 {
        tower.connector(level).verify_commutation().unwrap();
    }
}

#[test]
fn nop_tower_shallow_build() {
    let tower = nop_tower(3).unwrap();
    for level in 1..=3 {
        tower.stage(level).check_integrity().unwrap();
    }
    for level in 1..3 {
        tower.connector(level).verify_commutation().unwrap();
    }
}

#[test]
fn slot_arithmetic_example() {
    // all six multiplicities 1, one F-factor block per type, single block:
    // the new edge count is six affine copies plus the factor slots plus
    // the embedded copy.
    let seed = NccwData::with_canonical_layout(
        vec![4],
        vec![1, 1],
        [vec![vec![2, 2]], vec![vec![2, 2]]],
    );
    let family = TowerFamilySpec::plain(BaseKind::Path, Flavor::Unital);
    let tower = build_tower(&seed, Some(0), family, 2, |lower| {
        let ni = lower.i_sizes.len();
        let nj = 2 + ni; // two distinguished, one singleton per type
        let mut m_f = vec![vec![0u32; ni]; nj];
        for i in 0..ni {
            m_f[0][i] = 1;
            m_f[1][i] = 1;
            m_f[2 + i][i] = 1;
        }
        ConnectorSpec {
            num_q: 1,
            m_plus_upper: vec![vec![1]],
            m_plus_lower: vec![vec![1]],
            m_minus_upper: vec![vec![1]],
            m_minus_lower: vec![vec![1]],
            m_const_low: vec![vec![1]],
            m_const_high: vec![vec![1]],
            m_ident: vec![vec![0]],
            m_f_factor: vec![vec![lower.p_sizes[0] + 2; ni]],
            m_f,
            j_assign: [vec![Some(0)], vec![Some(1)]],
            frak_q: 0,
            z_blocks: Vec::new(),
        }
    })
    .unwrap();
    let s1 = tower.stage(1);
    let s2 = tower.stage(2);
    let y1 = s1.num_y() as u32;
    let factor_slots: u32 = (s1.p_sizes[0] + 2) * s1.i_sizes.iter().sum::<u32>();
    assert_eq!(
        s2.p_sizes[0],
        6 * y1 + factor_slots + s2.num_x() as u32
    );
    verify_slot_arithmetic(s2).unwrap();
}

#[test]
fn projection_endpoint_table() {
    // spot checks of the connector on a small path tower
    let tower = small_path_tower(2).unwrap();
    let conn = tower.connector(1);
    let upper = tower.stage(2);
    // find a lower-half block slot and check its endpoint projections
    let (plus_lower_slot, base_edge) = (0..upper.num_y() as u32)
        .find_map(|y| match upper.y_origin[y as usize] {
            nccw::tower::YOrigin::Block { block, y: ly } => {
                let info = upper.blocks[block as usize];
                (info.class == nccw::tower::BlockClass::PlusLower).then_some((y, ly))
            }
            _ => None,
        })
        .unwrap();
    // [0, (mu, y)] with the lower-half map lands at [0, y]
    let p0 = conn.project(SpecPoint::Interior {
        y: plus_lower_slot,
        t: Dyadic::new(1, 3), // 1/8
    });
    match p0 {
        SpecPoint::Interior { y, t } => {
            assert_eq!(y, base_edge);
            assert_eq!(t, Dyadic::new(1, 4));
        }
        other => panic!("unexpected projection {other:?}"),
    }
    // the halfway vertex of the embedded copy projects to [1/2, y]
    let emb = conn.embedded_slot(upper.b[0][plus_lower_slot as usize]).unwrap();
    let _ = emb;
}

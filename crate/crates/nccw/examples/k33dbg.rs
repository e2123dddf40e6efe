use nccw::tower::presets::nop_tower;
use nccw::tower::{BlockClass, UNDEF};

fn main() {
    let tower = nop_tower(3).unwrap();
    let conn1 = tower.connector(1);
    let conn2 = tower.connector(2);
    let mid = conn1.upper;
    let top = conn2.upper;
    let y = 0u32;
    let p = conn1.lower.y_p[y as usize];
    let mus: Vec<u32> = (0..mid.blocks.len() as u32)
        .filter(|&b| {
            let info = mid.blocks[b as usize];
            info.p == p && info.class.is_const()
        })
        .take(9)
        .collect();
    let e: Vec<u32> = mus.iter().map(|&b| conn1.block_slot(b, y)).collect();
    println!("e = {e:?}");
    for (k, &eij) in e.iter().enumerate() {
        let mut lows = Vec::new();
        let mut ups = Vec::new();
        for b in 0..top.blocks.len() as u32 {
            let info = top.blocks[b as usize];
            if info.p != mid.y_p[eij as usize] { continue; }
            if info.class == BlockClass::PlusLower {
                let slot = conn2.block_slot(b, eij);
                if top.b[0][slot as usize] != UNDEF { lows.push((b, top.b[0][slot as usize])); }
            }
            if info.class == BlockClass::PlusUpper {
                let slot = conn2.block_slot(b, eij);
                if top.b[1][slot as usize] != UNDEF { ups.push((b, top.b[1][slot as usize])); }
            }
        }
        println!("e[{k}]: lows={lows:?} ups={ups:?}");
    }
    for x in [192u32, 510] {
        println!("x{x}: i={} origin={:?}", top.x_i[x as usize], top.x_origin[x as usize]);
    }
    // which side-0 copy does each e belong to at the middle level?
    for (k, &eij) in e.iter().enumerate() {
        println!("e[{k}]: sb0={} sb1={} b0={} b1={}", mid.sb[0][eij as usize], mid.sb[1][eij as usize], mid.b[0][eij as usize], mid.b[1][eij as usize]);
    }
}

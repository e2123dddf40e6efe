use nccw::tower::presets::nop_tower;
use nccw::tower::{YOrigin, UNDEF};

fn main() {
    let tower = nop_tower(2).unwrap();
    let lower = tower.stage(2);
    let s = 0usize;
    let mut first_member = vec![UNDEF; lower.copies[s].len()];
    for y in 0..lower.num_y() {
        let c = lower.sb[s][y];
        if c != UNDEF && first_member[c as usize] == UNDEF {
            first_member[c as usize] = y as u32;
        }
    }
    for d in 0..10 {
        let y = first_member[d];
        let origin = lower.y_origin[y as usize];
        let cls = match origin {
            YOrigin::Block { block, .. } => format!("{:?}", lower.blocks[block as usize].class),
            o => format!("{o:?}"),
        };
        println!("copy {d}: first y{y} {cls}");
    }
}

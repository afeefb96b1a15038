//! Top-down episode maps as ASCII and SVG: walls, rooms, objects, the target
//! star, the trajectory polyline, and spawn/stop marks.

use eqa_core::grid::{GridEnvironment, ObjectId, Terrain};
use eqa_core::nav::Trajectory;

/// ASCII map. Legend: `#` wall, `.` free, `o` object, `m` marker, `*` target,
/// `+` trajectory, `S` spawn, `E` stop (`@` when spawn and stop coincide).
pub fn ascii_map(env: &GridEnvironment, target: ObjectId, traj: &Trajectory) -> String {
    let mut rows: Vec<Vec<char>> = (0..env.height())
        .map(|y| {
            (0..env.width())
                .map(|x| match env.cell(x, y).terrain {
                    Terrain::Wall => '#',
                    Terrain::Free => '.',
                })
                .collect()
        })
        .collect();
    for obj in &env.objects {
        rows[obj.pos.1][obj.pos.0] = if obj.is_marker { 'm' } else { 'o' };
    }
    for step in &traj.steps {
        let (x, y) = (step.state_after.x, step.state_after.y);
        rows[y][x] = '+';
    }
    if let Some(t) = env.object(target) {
        rows[t.pos.1][t.pos.0] = '*';
    }
    let spawn = (traj.spawn.x, traj.spawn.y);
    let stop = {
        let e = traj.end_state();
        (e.x, e.y)
    };
    if spawn == stop {
        rows[spawn.1][spawn.0] = '@';
    } else {
        rows[spawn.1][spawn.0] = 'S';
        rows[stop.1][stop.0] = 'E';
    }
    let mut out = String::new();
    for row in rows {
        out.extend(row);
        out.push('\n');
    }
    out.push_str("legend: # wall, . free, o object, m marker, * target, + trajectory, S spawn, E stop, @ spawn=stop\n");
    out
}


const CELL: usize = 16;

fn center(p: (usize, usize)) -> (usize, usize) {
    (p.0 * CELL + CELL / 2, p.1 * CELL + CELL / 2)
}

/// SVG map with the trajectory polyline and a star on the target.
pub fn svg_map(env: &GridEnvironment, target: ObjectId, traj: &Trajectory) -> String {
    let w = env.width() * CELL;
    let h = env.height() * CELL;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n"));
    // room tints cycle through a small palette
    let room_fill = ["#f4f0e8", "#e8f0f4", "#ede8f4", "#e8f4ea", "#f4e8ee", "#f0f4e8"];
    for y in 0..env.height() {
        for x in 0..env.width() {
            let cell = env.cell(x, y);
            let fill = match (cell.terrain, cell.room_id) {
                (Terrain::Wall, _) => "#333333",
                (Terrain::Free, Some(r)) => room_fill[r.0 % room_fill.len()],
                (Terrain::Free, None) => "#fafafa",
            };
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\"/>\n",
                x * CELL,
                y * CELL
            ));
        }
    }
    for obj in &env.objects {
        if obj.id == target {
            continue;
        }
        let (cx, cy) = center(obj.pos);
        let color = if obj.is_marker { "#9467bd" } else { "#8c564b" };
        s.push_str(&format!("<circle cx=\"{cx}\" cy=\"{cy}\" r=\"4\" fill=\"{color}\"/>\n"));
    }
    // trajectory polyline, spawn to stop
    let mut pts = vec![center((traj.spawn.x, traj.spawn.y))];
    pts.extend(traj.steps.iter().map(|st| center((st.state_after.x, st.state_after.y))));
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x},{y}")).collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#e6b400\" stroke-width=\"3\" stroke-linejoin=\"round\"/>\n",
        path.join(" ")
    ));
    if let Some(t) = env.object(target) {
        let (cx, cy) = center(t.pos);
        s.push_str(&format!(
            "<path d=\"M {} {} l 3 6 l 7 1 l -5 5 l 1 7 l -6 -3 l -6 3 l 1 -7 l -5 -5 l 7 -1 z\" fill=\"#d62728\"/>\n",
            cx,
            cy - 8
        ));
    }
    let (sx, sy) = center((traj.spawn.x, traj.spawn.y));
    s.push_str(&format!("<circle cx=\"{sx}\" cy=\"{sy}\" r=\"5\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n"));
    let (ex, ey) = center({
        let e = traj.end_state();
        (e.x, e.y)
    });
    s.push_str(&format!("<rect x=\"{}\" y=\"{}\" width=\"8\" height=\"8\" fill=\"#1f77b4\"/>\n", ex - 4, ey - 4));
    s.push_str("</svg>\n");
    s
}

//! Bar-chart rendering of a layout: one rectangle per interval, units along
//! the horizontal axis and the unit interval on the vertical axis.

use std::fmt::Write;

use geosampling::BarLayout;

const PLOT_HEIGHT: f64 = 400.0;
const BAR_WIDTH: f64 = 24.0;
const BAR_GAP: f64 = 12.0;
const LEFT: f64 = 48.0;
const TOP: f64 = 16.0;
const BOTTOM: f64 = 36.0;
const RIGHT: f64 = 16.0;

pub fn render(layout: &BarLayout) -> String {
    let n = layout.n_units();
    let plot_width = (n as f64 * (BAR_WIDTH + BAR_GAP)).max(BAR_WIDTH + BAR_GAP);
    let width = LEFT + plot_width + RIGHT;
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let base = TOP + PLOT_HEIGHT;
    let grid = layout.grid() as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(svg, r#"<g font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{LEFT:.1}" y1="{TOP:.1}" x2="{LEFT:.1}" y2="{base:.1}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{LEFT:.1}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="black"/>"#,
        LEFT + plot_width
    );
    for tick in 0..=4 {
        let y = base - PLOT_HEIGHT * tick as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0,
            tick as f64 / 4.0
        );
    }
    for (k, bar) in layout.bars().iter().enumerate() {
        let x = LEFT + BAR_GAP / 2.0 + k as f64 * (BAR_WIDTH + BAR_GAP);
        for iv in bar.intervals() {
            let top = base - PLOT_HEIGHT * iv.hi as f64 / grid;
            let h = PLOT_HEIGHT * iv.len() as f64 / grid;
            let _ = writeln!(
                svg,
                r#"<rect class="bar" data-unit="{}" x="{x:.3}" y="{top:.3}" width="{BAR_WIDTH:.3}" height="{h:.3}" fill="steelblue" stroke="black" stroke-width="0.5"/>"#,
                k + 1
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + BAR_WIDTH / 2.0,
            base + 16.0,
            k + 1
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

//! Pixel to ground mapping through the deployed fisheye lens, and the
//! look-up table built from it.

use crosswarn::geometry::{bbox_localization_error, Box3D, CameraModel, GroundLut};
use crosswarn::scenario::AgentClass;

fn main() {
    let cam = CameraModel::deployed();
    let foot = [8.0, -2.5, 0.0];
    let px = cam.ground_to_pixel(foot).expect("point is in view");
    let back = cam.pixel_to_ground(px[0], px[1]).expect("pixel sees the ground");
    println!("ground {:?} -> pixel [{:.1}, {:.1}] -> ground [{:.4}, {:.4}]", &foot[..2], px[0], px[1], back[0], back[1]);

    let lut = GroundLut::build(&cam);
    println!("LUT {}x{}, {} pixels see the ground, max range {:.1} m", lut.width(), lut.height(), lut.valid_count(), lut.max_range());

    for x in [3.0, 10.0, 25.0] {
        let err = |c: AgentClass| bbox_localization_error(&cam, &Box3D::new([x, 0.0], c.default_dims(), std::f64::consts::FRAC_PI_2)).unwrap();
        println!("{x:>4} m: box-foot error pedestrian {:.3} m, cyclist {:.3} m", err(AgentClass::Pedestrian), err(AgentClass::Cyclist));
    }
}

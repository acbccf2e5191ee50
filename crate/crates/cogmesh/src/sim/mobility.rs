//! Random-walk mobility: each node draws a speed from its mobility
//! class and a uniform heading, walks straight for one epoch, then
//! redraws. Arena walls reflect.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How fast a node's carrier moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityClass {
    /// Pedestrians, 0–2 m/s.
    Slow,
    /// Joggers and cyclists, 2–8 m/s.
    Medium,
    /// Vehicles, 8–13 m/s.
    Fast,
}

impl MobilityClass {
    pub fn speed_range(self) -> (f64, f64) {
        match self {
            MobilityClass::Slow => (0.0, 2.0),
            MobilityClass::Medium => (2.0, 8.0),
            MobilityClass::Fast => (8.0, 13.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MobilityClass::Slow => "slow",
            MobilityClass::Medium => "medium",
            MobilityClass::Fast => "fast",
        }
    }
}

/// Seconds a node keeps one (speed, heading) draw.
pub const EPOCH_SECONDS: f64 = 5.0;

/// One node's walk state.
#[derive(Clone, Debug)]
pub struct Walker {
    pub position: (f64, f64),
    speed: f64,
    heading: f64,
    epoch_left: f64,
}

impl Walker {
    pub fn new(position: (f64, f64), class: MobilityClass, rng: &mut ChaCha8Rng) -> Self {
        let (speed, heading) = draw(class, rng);
        Self { position, speed, heading, epoch_left: EPOCH_SECONDS }
    }

    /// Advance `dt` seconds inside `arena`, reflecting at the walls.
    pub fn step(&mut self, dt: f64, arena: (f64, f64), class: MobilityClass, rng: &mut ChaCha8Rng) -> (f64, f64) {
        if dt <= 0.0 {
            return self.position;
        }
        self.epoch_left -= dt;
        if self.epoch_left <= 0.0 {
            let (speed, heading) = draw(class, rng);
            self.speed = speed;
            self.heading = heading;
            self.epoch_left = EPOCH_SECONDS;
        }
        let mut x = self.position.0 + self.speed * dt * self.heading.cos();
        let mut y = self.position.1 + self.speed * dt * self.heading.sin();

        // Mirror the offending coordinate (and the matching heading
        // component) until the point is back inside. One step is far
        // shorter than the arena, so this settles immediately.
        loop {
            if x < 0.0 {
                x = -x;
                self.heading = std::f64::consts::PI - self.heading;
            } else if x > arena.0 {
                x = 2.0 * arena.0 - x;
                self.heading = std::f64::consts::PI - self.heading;
            } else if y < 0.0 {
                y = -y;
                self.heading = -self.heading;
            } else if y > arena.1 {
                y = 2.0 * arena.1 - y;
                self.heading = -self.heading;
            } else {
                break;
            }
        }
        self.position = (x, y);
        self.position
    }
}

fn draw(class: MobilityClass, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (lo, hi) = class.speed_range();
    let speed = rng.gen_range(lo..hi);
    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
    (speed, heading)
}

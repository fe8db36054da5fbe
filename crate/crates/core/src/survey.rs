//! Survey plan: scanner settings and the ordered list of static scan legs,
//! plus the survey XML format.
//!
//! ```xml
//! <?xml version="1.0"?>
//! <document>
//!   <survey name="plant" scene="scene.xml#plant" seed="42">
//!     <scannerSettings horizontalStart_deg="0" ... beamSampleQuality="3"/>
//!     <leg>
//!       <platformSettings x="50" y="0" z="1.7"/>
//!     </leg>
//!   </survey>
//! </document>
//! ```
//!
//! A `<scannerSettings>` inside a leg overrides the survey defaults for that
//! leg; attributes it omits keep their default values.

use std::fmt::Write as _;

use roxmltree::Node;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::scene::ScanPosition;
use crate::xml::{
    child, children, escape_attr, optional_attr, parse_document, reject, required_attr, Rejection,
    DECLARATION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurveyError {
    #[error("malformed survey XML <{element}>: {reason}")]
    MalformedSurveyXml { element: String, reason: String },
    #[error("survey has no legs")]
    NoLegs,
    #[error("unknown scanner preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid scanner settings: {0}")]
    InvalidSettings(String),
}

impl From<Rejection> for SurveyError {
    fn from((element, reason): Rejection) -> Self {
        SurveyError::MalformedSurveyXml { element, reason }
    }
}

/// Angular sweep and beam parameters of a static scanner. Angles are in
/// degrees; azimuth is measured about +z from +x, elevation from the
/// horizontal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScannerSettings {
    pub horiz_start: f64,
    pub horiz_end: f64,
    /// Degrees per azimuth step.
    pub horiz_res: f64,
    pub vert_start: f64,
    pub vert_end: f64,
    /// Degrees per elevation step.
    pub vert_res: f64,
    /// Meters.
    pub max_range: f64,
    /// Standard deviation of additive range noise (m).
    pub range_noise_sigma: f64,
    /// Full cone angle of the beam (mrad).
    pub beam_divergence: f64,
    /// Number of concentric subray rings, counting the axial ray as ring 0.
    pub beam_sample_quality: u32,
}

impl Default for ScannerSettings {
    fn default() -> Self {
        preset("tls-default").expect("built-in preset")
    }
}

/// Named scanner configurations: `generic-lidar` and `tls-default`.
pub fn preset(name: &str) -> Result<ScannerSettings, SurveyError> {
    match name {
        "generic-lidar" => Ok(ScannerSettings {
            horiz_start: -180.0,
            horiz_end: 180.0,
            horiz_res: 0.05,
            vert_start: 0.0,
            vert_end: 0.0,
            vert_res: 0.05,
            max_range: 100.0,
            range_noise_sigma: 0.0,
            beam_divergence: 0.0,
            beam_sample_quality: 1,
        }),
        "tls-default" => Ok(ScannerSettings {
            horiz_start: 0.0,
            horiz_end: 360.0,
            horiz_res: 0.04,
            vert_start: -40.0,
            vert_end: 60.0,
            vert_res: 0.04,
            max_range: 120.0,
            range_noise_sigma: 0.002,
            beam_divergence: 0.3,
            beam_sample_quality: 3,
        }),
        other => Err(SurveyError::UnknownPreset(other.to_string())),
    }
}

impl ScannerSettings {
    pub fn validate(&self) -> Result<(), SurveyError> {
        let bad = |msg: &str| Err(SurveyError::InvalidSettings(msg.to_string()));
        let values = [
            self.horiz_start,
            self.horiz_end,
            self.horiz_res,
            self.vert_start,
            self.vert_end,
            self.vert_res,
            self.max_range,
            self.range_noise_sigma,
            self.beam_divergence,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return bad("all values must be finite");
        }
        if self.horiz_start >= self.horiz_end {
            return bad("horizontal start must be below horizontal end");
        }
        if self.horiz_end - self.horiz_start > 360.0 + 1e-9 {
            return bad("horizontal sweep exceeds 360 degrees");
        }
        if self.vert_start > self.vert_end {
            return bad("vertical start must not exceed vertical end");
        }
        if self.vert_start < -90.0 || self.vert_end > 90.0 {
            return bad("vertical sweep must stay within [-90, 90] degrees");
        }
        if self.horiz_res <= 0.0 || self.vert_res <= 0.0 {
            return bad("angular resolutions must be positive");
        }
        if self.max_range <= 0.0 {
            return bad("max range must be positive");
        }
        if self.range_noise_sigma < 0.0 || self.beam_divergence < 0.0 {
            return bad("noise sigma and beam divergence must be non-negative");
        }
        if self.beam_sample_quality < 1 {
            return bad("beam sample quality must be at least 1");
        }
        Ok(())
    }

    /// Azimuth columns. The end angle is never sampled, so a full circle
    /// has no duplicate column at the 0/360 seam.
    pub fn azimuth_steps(&self) -> usize {
        (((self.horiz_end - self.horiz_start) / self.horiz_res).round() as usize).max(1)
    }

    /// Elevation rows, both endpoints included.
    pub fn elevation_steps(&self) -> usize {
        ((self.vert_end - self.vert_start) / self.vert_res).round() as usize + 1
    }

    pub fn pulse_count(&self) -> usize {
        self.azimuth_steps() * self.elevation_steps()
    }

    /// Azimuth of column `i` in radians.
    pub fn azimuth(&self, i: usize) -> f64 {
        (self.horiz_start + i as f64 * self.horiz_res).to_radians()
    }

    /// Elevation of row `j` in radians.
    pub fn elevation(&self, j: usize) -> f64 {
        (self.vert_start + j as f64 * self.vert_res).to_radians()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leg {
    pub position: Vec3,
    pub settings: Option<ScannerSettings>,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Survey {
    pub name: String,
    /// Scene file path, relative to the survey file when not absolute.
    pub scene_path: String,
    pub scene_id: String,
    pub settings: ScannerSettings,
    pub legs: Vec<Leg>,
    pub seed: u64,
}

impl Survey {
    /// One leg per scan position, all using `settings`.
    pub fn from_positions(
        name: &str,
        scene_path: &str,
        scene_id: &str,
        settings: ScannerSettings,
        positions: &[ScanPosition],
        seed: u64,
    ) -> Self {
        Survey {
            name: name.to_string(),
            scene_path: scene_path.to_string(),
            scene_id: scene_id.to_string(),
            settings,
            legs: positions
                .iter()
                .enumerate()
                .map(|(index, p)| Leg {
                    position: p.position,
                    settings: None,
                    index,
                })
                .collect(),
            seed,
        }
    }

    pub fn settings_for<'a>(&'a self, leg: &'a Leg) -> &'a ScannerSettings {
        leg.settings.as_ref().unwrap_or(&self.settings)
    }

    pub fn validate(&self) -> Result<(), SurveyError> {
        if self.legs.is_empty() {
            return Err(SurveyError::NoLegs);
        }
        self.settings.validate()?;
        for leg in &self.legs {
            if !leg.position.is_finite() {
                return Err(SurveyError::InvalidSettings(format!(
                    "leg {} position is not finite",
                    leg.index
                )));
            }
            if let Some(s) = &leg.settings {
                s.validate()?;
            }
        }
        Ok(())
    }
}

const SETTING_ATTRS: [&str; 10] = [
    "horizontalStart_deg",
    "horizontalEnd_deg",
    "horizontalResolution_deg",
    "verticalStart_deg",
    "verticalEnd_deg",
    "verticalResolution_deg",
    "maxRange_m",
    "rangeNoiseSigma_m",
    "beamDivergence_mrad",
    "beamSampleQuality",
];

fn settings_element(indent: &str, s: &ScannerSettings) -> String {
    let values = [
        s.horiz_start,
        s.horiz_end,
        s.horiz_res,
        s.vert_start,
        s.vert_end,
        s.vert_res,
        s.max_range,
        s.range_noise_sigma,
        s.beam_divergence,
    ];
    let mut out = format!("{indent}<scannerSettings");
    for (name, v) in SETTING_ATTRS.iter().zip(values) {
        let _ = write!(out, " {name}=\"{v}\"");
    }
    let _ = writeln!(out, " {}=\"{}\"/>", SETTING_ATTRS[9], s.beam_sample_quality);
    out
}

fn read_settings(node: Node<'_, '_>, base: &ScannerSettings) -> Result<ScannerSettings, Rejection> {
    let mut s = *base;
    let floats: [&mut f64; 9] = [
        &mut s.horiz_start,
        &mut s.horiz_end,
        &mut s.horiz_res,
        &mut s.vert_start,
        &mut s.vert_end,
        &mut s.vert_res,
        &mut s.max_range,
        &mut s.range_noise_sigma,
        &mut s.beam_divergence,
    ];
    for (name, slot) in SETTING_ATTRS.iter().zip(floats) {
        if let Some(v) = optional_attr::<f64>(node, name)? {
            *slot = v;
        }
    }
    if let Some(q) = optional_attr::<u32>(node, SETTING_ATTRS[9])? {
        s.beam_sample_quality = q;
    }
    s.validate()
        .map_err(|e| reject("scannerSettings", e.to_string()))?;
    Ok(s)
}

pub fn write_survey_xml(survey: &Survey) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(DECLARATION);
    out.push('\n');
    out.push_str("<document>\n");
    let scene_ref = format!("{}#{}", survey.scene_path, survey.scene_id);
    let _ = writeln!(
        out,
        "  <survey name=\"{}\" scene=\"{}\" seed=\"{}\">",
        escape_attr(&survey.name),
        escape_attr(&scene_ref),
        survey.seed
    );
    out.push_str(&settings_element("    ", &survey.settings));
    for leg in &survey.legs {
        out.push_str("    <leg>\n");
        let p = leg.position;
        let _ = writeln!(
            out,
            "      <platformSettings x=\"{}\" y=\"{}\" z=\"{}\"/>",
            p.x, p.y, p.z
        );
        if let Some(s) = &leg.settings {
            out.push_str(&settings_element("      ", s));
        }
        out.push_str("    </leg>\n");
    }
    out.push_str("  </survey>\n");
    out.push_str("</document>\n");
    out.into_bytes()
}

pub fn parse_survey_xml(bytes: &[u8]) -> Result<Survey, SurveyError> {
    let doc = parse_document(bytes)?;
    let root = doc.root_element();
    if !root.has_tag_name("document") {
        return Err(reject(
            "document",
            format!("unexpected root <{}>", root.tag_name().name()),
        )
        .into());
    }
    let node = child(root, "survey").ok_or_else(|| reject("document", "missing <survey>"))?;
    let name = required_attr(node, "name")?.to_string();
    let scene_ref = required_attr(node, "scene")?;
    let (scene_path, scene_id) = scene_ref.rsplit_once('#').ok_or_else(|| {
        reject(
            "survey",
            format!("scene reference {scene_ref:?} lacks \"#id\""),
        )
    })?;
    let seed: u64 = optional_attr(node, "seed")?.unwrap_or(crate::DEFAULT_SEED);

    let settings_node = child(node, "scannerSettings")
        .ok_or_else(|| reject("survey", "missing <scannerSettings>"))?;
    // Defaults must be complete; nothing to inherit from.
    for a in SETTING_ATTRS {
        required_attr(settings_node, a)?;
    }
    let settings = read_settings(settings_node, &ScannerSettings::default())?;

    let mut legs = Vec::new();
    for (index, leg_node) in children(node, "leg").enumerate() {
        let platform = child(leg_node, "platformSettings")
            .ok_or_else(|| reject("leg", format!("leg {index} has no <platformSettings>")))?;
        let mut c = [0.0f64; 3];
        for (slot, key) in c.iter_mut().zip(["x", "y", "z"]) {
            *slot = crate::xml::float_attr(platform, key)?;
        }
        let overrides = child(leg_node, "scannerSettings")
            .map(|n| read_settings(n, &settings))
            .transpose()?;
        legs.push(Leg {
            position: Vec3::new(c[0], c[1], c[2]),
            settings: overrides,
            index,
        });
    }
    if legs.is_empty() {
        return Err(SurveyError::NoLegs);
    }
    Ok(Survey {
        name,
        scene_path: scene_path.to_string(),
        scene_id: scene_id.to_string(),
        settings,
        legs,
        seed,
    })
}

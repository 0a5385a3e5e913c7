//! Standard-interconnect ports, the module assembly graph, and the queries
//! that run over it: configuration recognition, power budget and data
//! routing.
//!
//! A coupling advances mechanical → power → data. Only fully coupled links
//! carry messages.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BUS_VOLTAGE_V: f64 = 48.0;
pub const DEFAULT_CURRENT_LIMIT_A: f64 = 14.0;
pub const DEFAULT_UNIT_DRAW_W: f64 = 5.0;
pub const DEFAULT_OBC_DRAW_W: f64 = 25.0;
pub const DEFAULT_ILLUMINATION_DRAW_W: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterconnectError {
    #[error("unknown port `{0}`")]
    UnknownPort(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("port `{0}` is busy")]
    PortBusy(String),
    #[error("ports `{0}` and `{1}` belong to the same module")]
    SelfCoupling(String, String),
    #[error("port `{0}` is not coupled")]
    NotCoupled(String),
    #[error("coupling at port `{0}` is already fully established")]
    AlreadyFull(String),
    #[error("releasing port `{0}` would leave the assembly without an anchor")]
    WouldDetachAssembly(String),
    #[error("fixture `{0}` is already occupied")]
    FixtureOccupied(String),
    #[error("configuration not recognized: {0}")]
    Unrecognized(String),
    #[error("assembly is not anchored to any fixed point")]
    UnanchoredAssembly,
    #[error("invalid assembly: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, InterconnectError>;

/// Coupling stage of a standard interconnect.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum PortState {
    #[default]
    #[serde(rename = "free")]
    Free,
    #[serde(rename = "latched")]
    Latched,
    #[serde(rename = "power")]
    PowerCoupled,
    #[serde(rename = "full")]
    FullCoupled,
}

impl PortState {
    pub fn next(self) -> Option<Self> {
        match self {
            Self::Free => None,
            Self::Latched => Some(Self::PowerCoupled),
            Self::PowerCoupled => Some(Self::FullCoupled),
            Self::FullCoupled => None,
        }
    }

    pub fn carries_power(self) -> bool {
        self >= Self::PowerCoupled
    }
}

/// Position of a port on its module. Only the MIM uses the named roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortRole {
    Left,
    Rear,
    /// Reserved for a tool-handling arm.
    Right,
    #[default]
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiPort {
    pub id: String,
    pub owner: String,
    #[serde(default)]
    pub role: PortRole,
    #[serde(default)]
    pub state: PortState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
}

impl SiPort {
    pub fn new(id: impl Into<String>, owner: impl Into<String>, role: PortRole) -> Self {
        Self {
            id: id.into(),
            owner: owner.into(),
            role,
            state: PortState::Free,
            peer: None,
            fixture: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Mim,
    WalkingManipulator,
    Shuttle,
    LargeArm,
    Tool,
    OruModule,
}

impl ModuleKind {
    /// Shuttles and the large arm are part of the station and count as fixed points.
    pub fn is_grounded(self) -> bool {
        matches!(self, Self::Shuttle | Self::LargeArm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerUnit {
    pub name: String,
    pub watts: f64,
}

impl PowerUnit {
    pub fn new(name: impl Into<String>, watts: f64) -> Self {
        Self {
            name: name.into(),
            watts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleAsset {
    pub id: String,
    pub kind: ModuleKind,
    pub ports: Vec<SiPort>,
    #[serde(default)]
    pub power_draw_w: f64,
    #[serde(default)]
    pub internal_units: Vec<PowerUnit>,
}

impl ModuleAsset {
    /// MIM with ports `<id>.left`, `<id>.rear`, `<id>.right` and the default
    /// internal electronics: five 5 W units plus the on-board computer and
    /// the ring illuminator.
    pub fn mim(id: impl Into<String>) -> Self {
        let id = id.into();
        let ports = [
            ("left", PortRole::Left),
            ("rear", PortRole::Rear),
            ("right", PortRole::Right),
        ]
        .into_iter()
        .map(|(name, role)| SiPort::new(format!("{id}.{name}"), id.clone(), role))
        .collect();
        let mut internal_units: Vec<PowerUnit> = [
            "camera_array",
            "profilometer",
            "thermal_imager",
            "tilt_drive",
            "lid_drive",
        ]
        .into_iter()
        .map(|name| PowerUnit::new(name, DEFAULT_UNIT_DRAW_W))
        .collect();
        internal_units.push(PowerUnit::new("obc", DEFAULT_OBC_DRAW_W));
        internal_units.push(PowerUnit::new("illumination", DEFAULT_ILLUMINATION_DRAW_W));
        Self {
            id,
            kind: ModuleKind::Mim,
            ports,
            power_draw_w: 0.0,
            internal_units,
        }
    }

    /// Walking manipulator with one interconnect per end: `<id>.a` and `<id>.b`.
    pub fn walking_manipulator(id: impl Into<String>) -> Self {
        Self::with_ports(id, ModuleKind::WalkingManipulator, &["a", "b"])
    }

    pub fn with_ports(id: impl Into<String>, kind: ModuleKind, names: &[&str]) -> Self {
        let id = id.into();
        let ports = names
            .iter()
            .map(|n| SiPort::new(format!("{id}.{n}"), id.clone(), PortRole::Generic))
            .collect();
        Self {
            id,
            kind,
            ports,
            power_draw_w: 0.0,
            internal_units: Vec::new(),
        }
    }

    pub fn with_power(mut self, power_draw_w: f64) -> Self {
        self.power_draw_w = power_draw_w;
        self
    }

    pub fn total_draw_w(&self) -> f64 {
        self.power_draw_w + self.internal_units.iter().map(|u| u.watts).sum::<f64>()
    }

    pub fn port_with_role(&self, role: PortRole) -> Option<&SiPort> {
        self.ports.iter().find(|p| p.role == role)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub port_a: String,
    pub port_b: String,
    pub state: PortState,
}

impl Coupling {
    fn involves(&self, port: &str) -> bool {
        self.port_a == port || self.port_b == port
    }

    fn other(&self, port: &str) -> &str {
        if self.port_a == port {
            &self.port_b
        } else {
            &self.port_a
        }
    }
}

/// A port latched onto a structural fixture point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub port: String,
    pub fixture: String,
    pub state: PortState,
}

/// Deployment configuration recognized from the assembly structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    Walking,
    ExternallyMounted,
    LargeArmMounted,
    Maintenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub total_power_w: f64,
    pub bus_voltage_v: f64,
    pub total_current_a: f64,
    pub limit_a: f64,
    pub within_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Delivered { hops: usize, path: Vec<String> },
    NoRoute,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssemblyGraph {
    #[serde(default)]
    pub modules: Vec<ModuleAsset>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
    #[serde(default)]
    pub anchors: Vec<Anchor>,
}

impl AssemblyGraph {
    pub fn new(modules: Vec<ModuleAsset>) -> Result<Self> {
        let graph = Self {
            modules,
            couplings: Vec::new(),
            anchors: Vec::new(),
        };
        graph.validate()?;
        Ok(graph)
    }

    /// MIM carried by two fully coupled walking manipulators (`wm_left`,
    /// `wm_rear`) whose free ends are anchored on the given fixtures.
    pub fn walking(left_fixture: &str, rear_fixture: &str) -> Result<Self> {
        let graph = Self::new(vec![
            ModuleAsset::mim("mim"),
            ModuleAsset::walking_manipulator("wm_left"),
            ModuleAsset::walking_manipulator("wm_rear"),
        ])?
        .couple_full("mim.left", "wm_left.a")?
        .couple_full("mim.rear", "wm_rear.a")?
        .anchor_full("wm_left.b", left_fixture)?
        .anchor_full("wm_rear.b", rear_fixture)?;
        Ok(graph)
    }

    /// Walking assembly with a third manipulator (`wm_tool`) fully coupled
    /// to the MIM's right port for tool work.
    pub fn maintenance(left_fixture: &str, rear_fixture: &str) -> Result<Self> {
        let mut graph = Self::walking(left_fixture, rear_fixture)?;
        graph
            .modules
            .push(ModuleAsset::walking_manipulator("wm_tool"));
        graph.couple_full("mim.right", "wm_tool.a")
    }

    /// Checks every structural invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(InterconnectError::Invalid(msg));
        let mut module_ids = BTreeSet::new();
        let mut port_ids = BTreeSet::new();
        for module in &self.modules {
            if !module_ids.insert(module.id.as_str()) {
                return invalid(format!("duplicate module `{}`", module.id));
            }
            for port in &module.ports {
                if !port_ids.insert(port.id.as_str()) {
                    return invalid(format!("duplicate port `{}`", port.id));
                }
                if port.owner != module.id {
                    return invalid(format!("port `{}` owner mismatch", port.id));
                }
                if port.peer.is_some() && port.fixture.is_some() {
                    return invalid(format!("port `{}` has both peer and fixture", port.id));
                }
                let linked = port.peer.is_some() || port.fixture.is_some();
                if (port.state != PortState::Free) != linked {
                    return invalid(format!("port `{}` state disagrees with links", port.id));
                }
            }
            match module.kind {
                ModuleKind::Mim => {
                    let roles: BTreeSet<_> = module.ports.iter().map(|p| p.role).collect();
                    let expected: BTreeSet<_> =
                        [PortRole::Left, PortRole::Rear, PortRole::Right].into();
                    if module.ports.len() != 3 || roles != expected {
                        return invalid(format!(
                            "MIM `{}` needs exactly left, rear and right ports",
                            module.id
                        ));
                    }
                }
                ModuleKind::WalkingManipulator if module.ports.len() != 2 => {
                    return invalid(format!("walking manipulator `{}` needs 2 ports", module.id));
                }
                _ => {}
            }
        }
        let mut used = BTreeSet::new();
        for c in &self.couplings {
            for (me, other) in [(&c.port_a, &c.port_b), (&c.port_b, &c.port_a)] {
                let port = self
                    .port(me)
                    .ok_or_else(|| InterconnectError::UnknownPort(me.clone()))?;
                if !used.insert(me.as_str()) {
                    return invalid(format!("port `{me}` used twice"));
                }
                if port.peer.as_deref() != Some(other.as_str()) || port.state != c.state {
                    return invalid(format!("port `{me}` does not mirror its coupling"));
                }
            }
            if c.state == PortState::Free {
                return invalid("coupling in free state".into());
            }
        }
        let mut fixtures = BTreeSet::new();
        for a in &self.anchors {
            let port = self
                .port(&a.port)
                .ok_or_else(|| InterconnectError::UnknownPort(a.port.clone()))?;
            if !used.insert(a.port.as_str()) {
                return invalid(format!("port `{}` used twice", a.port));
            }
            if !fixtures.insert(a.fixture.as_str()) {
                return invalid(format!("fixture `{}` anchored twice", a.fixture));
            }
            if port.fixture.as_deref() != Some(a.fixture.as_str()) || port.state != a.state {
                return invalid(format!("port `{}` does not mirror its anchor", a.port));
            }
        }
        for module in &self.modules {
            for port in &module.ports {
                if port.state != PortState::Free && !used.contains(port.id.as_str()) {
                    return invalid(format!("port `{}` claims a missing link", port.id));
                }
            }
        }
        Ok(())
    }

    pub fn module(&self, id: &str) -> Option<&ModuleAsset> {
        self.modules.iter().find(|m| m.id == id)
    }

    pub fn port(&self, id: &str) -> Option<&SiPort> {
        self.modules
            .iter()
            .flat_map(|m| m.ports.iter())
            .find(|p| p.id == id)
    }

    fn port_mut(&mut self, id: &str) -> Option<&mut SiPort> {
        self.modules
            .iter_mut()
            .flat_map(|m| m.ports.iter_mut())
            .find(|p| p.id == id)
    }

    fn require_port(&self, id: &str) -> Result<&SiPort> {
        self.port(id)
            .ok_or_else(|| InterconnectError::UnknownPort(id.to_string()))
    }

    pub fn mims(&self) -> impl Iterator<Item = &ModuleAsset> {
        self.modules.iter().filter(|m| m.kind == ModuleKind::Mim)
    }

    /// Fixture a port is anchored to, if any.
    pub fn anchor_of(&self, port: &str) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.port == port)
    }

    pub fn is_fixture_taken(&self, fixture: &str) -> bool {
        self.anchors.iter().any(|a| a.fixture == fixture)
    }

    /// Peer port across a coupling.
    pub fn peer_of(&self, port: &str) -> Option<&str> {
        self.couplings
            .iter()
            .find(|c| c.involves(port))
            .map(|c| c.other(port))
    }

    /// Mechanically latch two free ports of different modules.
    pub fn couple(&self, port_a: &str, port_b: &str) -> Result<Self> {
        let a = self.require_port(port_a)?;
        let b = self.require_port(port_b)?;
        if a.owner == b.owner {
            return Err(InterconnectError::SelfCoupling(a.id.clone(), b.id.clone()));
        }
        for port in [a, b] {
            if port.state != PortState::Free {
                return Err(InterconnectError::PortBusy(port.id.clone()));
            }
        }
        let mut next = self.clone();
        for (me, other) in [(port_a, port_b), (port_b, port_a)] {
            let port = next.port_mut(me).expect("checked above");
            port.state = PortState::Latched;
            port.peer = Some(other.to_string());
        }
        next.couplings.push(Coupling {
            port_a: port_a.to_string(),
            port_b: port_b.to_string(),
            state: PortState::Latched,
        });
        Ok(next)
    }

    /// Latch a free port onto a structural fixture point.
    pub fn anchor(&self, port: &str, fixture: &str) -> Result<Self> {
        let p = self.require_port(port)?;
        if p.state != PortState::Free {
            return Err(InterconnectError::PortBusy(port.to_string()));
        }
        if self.is_fixture_taken(fixture) {
            return Err(InterconnectError::FixtureOccupied(fixture.to_string()));
        }
        let mut next = self.clone();
        let p = next.port_mut(port).expect("checked above");
        p.state = PortState::Latched;
        p.fixture = Some(fixture.to_string());
        next.anchors.push(Anchor {
            port: port.to_string(),
            fixture: fixture.to_string(),
            state: PortState::Latched,
        });
        Ok(next)
    }

    /// Advance the link at `port` one stage, mirrored on its peer.
    pub fn advance_coupling(&self, port: &str) -> Result<Self> {
        let p = self.require_port(port)?;
        let next_state = match p.state {
            PortState::Free => return Err(InterconnectError::NotCoupled(port.to_string())),
            PortState::FullCoupled => return Err(InterconnectError::AlreadyFull(port.to_string())),
            s => s.next().expect("latched and power states advance"),
        };
        let mut next = self.clone();
        if let Some(c) = next.couplings.iter_mut().find(|c| c.involves(port)) {
            c.state = next_state;
            let (a, b) = (c.port_a.clone(), c.port_b.clone());
            next.port_mut(&a).expect("coupled port").state = next_state;
            next.port_mut(&b).expect("coupled port").state = next_state;
        } else if let Some(anchor) = next.anchors.iter_mut().find(|a| a.port == port) {
            anchor.state = next_state;
            next.port_mut(port).expect("anchored port").state = next_state;
        } else {
            return Err(InterconnectError::Invalid(format!(
                "port `{port}` is not free but has no link"
            )));
        }
        Ok(next)
    }

    pub fn couple_full(&self, port_a: &str, port_b: &str) -> Result<Self> {
        self.couple(port_a, port_b)?
            .advance_coupling(port_a)?
            .advance_coupling(port_a)
    }

    pub fn anchor_full(&self, port: &str, fixture: &str) -> Result<Self> {
        self.anchor(port, fixture)?
            .advance_coupling(port)?
            .advance_coupling(port)
    }

    /// Release the link at `port`, refusing to cut the last anchorage of a MIM.
    pub fn decouple(&self, port: &str) -> Result<Self> {
        let p = self.require_port(port)?;
        if p.state == PortState::Free {
            return Err(InterconnectError::NotCoupled(port.to_string()));
        }
        let owner = p.owner.clone();
        let mut next = self.clone();
        if let Some(i) = next.couplings.iter().position(|c| c.involves(port)) {
            let c = next.couplings.remove(i);
            for id in [&c.port_a, &c.port_b] {
                let q = next.port_mut(id).expect("coupled port");
                q.state = PortState::Free;
                q.peer = None;
            }
        } else if let Some(i) = next.anchors.iter().position(|a| a.port == port) {
            next.anchors.remove(i);
            let q = next.port_mut(port).expect("anchored port");
            q.state = PortState::Free;
            q.fixture = None;
        }

        let guarded: Vec<String> = if self.mims().next().is_some() {
            self.mims().map(|m| m.id.clone()).collect()
        } else {
            vec![owner]
        };
        for module in &guarded {
            if self.is_grounded(module) && !next.is_grounded(module) {
                return Err(InterconnectError::WouldDetachAssembly(port.to_string()));
            }
        }
        Ok(next)
    }

    /// Module adjacency through couplings at or above `min_state`, neighbors sorted.
    fn adjacency(&self, min_state: PortState) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = self
            .modules
            .iter()
            .map(|m| (m.id.as_str(), BTreeSet::new()))
            .collect();
        for c in self.couplings.iter().filter(|c| c.state >= min_state) {
            let (Some(a), Some(b)) = (self.port(&c.port_a), self.port(&c.port_b)) else {
                continue;
            };
            adj.entry(&a.owner).or_default().insert(&b.owner);
            adj.entry(&b.owner).or_default().insert(&a.owner);
        }
        adj
    }

    /// Modules mechanically connected to `module`, including itself.
    pub fn component(&self, module: &str) -> BTreeSet<String> {
        let adj = self.adjacency(PortState::Latched);
        let mut seen = BTreeSet::new();
        if !adj.contains_key(module) {
            return seen;
        }
        let mut queue = VecDeque::from([module]);
        seen.insert(module.to_string());
        while let Some(m) = queue.pop_front() {
            for &n in &adj[m] {
                if seen.insert(n.to_string()) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Whether the module's component holds onto a fixture or a station module.
    pub fn is_grounded(&self, module: &str) -> bool {
        let component = self.component(module);
        let anchored = self.anchors.iter().any(|a| {
            self.port(&a.port)
                .is_some_and(|p| component.contains(&p.owner))
        });
        anchored
            || self
                .modules
                .iter()
                .any(|m| m.kind.is_grounded() && component.contains(&m.id))
    }

    /// The module coupled to the MIM port with the given role, if any.
    pub fn module_on_role(&self, mim: &ModuleAsset, role: PortRole) -> Option<&ModuleAsset> {
        let port = mim.port_with_role(role)?;
        let peer = self.peer_of(&port.id)?;
        self.module(&self.port(peer)?.owner)
    }

    /// Whether the walking manipulator attached at a MIM port has its
    /// distal end anchored on a fixture.
    fn leg_anchored(&self, mim: &ModuleAsset, role: PortRole) -> bool {
        self.distal_port(mim, role)
            .is_some_and(|p| self.anchor_of(&p.id).is_some())
    }

    /// Free-end port of the arm attached at a MIM port.
    pub fn distal_port(&self, mim: &ModuleAsset, role: PortRole) -> Option<&SiPort> {
        let proximal = self.peer_of(&mim.port_with_role(role)?.id)?;
        let arm = self.module(&self.port(proximal)?.owner)?;
        if arm.kind != ModuleKind::WalkingManipulator {
            return None;
        }
        arm.ports.iter().find(|p| p.id != proximal)
    }

    /// Recognize the deployment configuration from the graph structure.
    pub fn validate_configuration(&self) -> Result<Configuration> {
        let mut mims = self.mims();
        let (Some(mim), None) = (mims.next(), mims.next()) else {
            return Err(InterconnectError::Unrecognized(
                "assembly must contain exactly one MIM".into(),
            ));
        };
        if !self.is_grounded(&mim.id) {
            return Err(InterconnectError::UnanchoredAssembly);
        }
        let kind_on = |role| self.module_on_role(mim, role).map(|m| m.kind);
        let is_wm = |role| kind_on(role) == Some(ModuleKind::WalkingManipulator);

        let base = if [PortRole::Left, PortRole::Rear, PortRole::Right]
            .into_iter()
            .any(|r| kind_on(r) == Some(ModuleKind::LargeArm))
        {
            Some(Configuration::LargeArmMounted)
        } else if is_wm(PortRole::Left)
            && is_wm(PortRole::Rear)
            && (self.leg_anchored(mim, PortRole::Left) || self.leg_anchored(mim, PortRole::Rear))
        {
            Some(Configuration::Walking)
        } else {
            let mounts: Vec<PortRole> = [PortRole::Left, PortRole::Rear]
                .into_iter()
                .filter(|&r| is_wm(r) && self.arm_reaches_fixed_point(mim, r))
                .collect();
            (mounts.len() == 1).then_some(Configuration::ExternallyMounted)
        };

        let tool_arm = is_wm(PortRole::Right);
        match (base, kind_on(PortRole::Right)) {
            (Some(Configuration::LargeArmMounted), Some(ModuleKind::LargeArm)) => {
                Ok(Configuration::LargeArmMounted)
            }
            (Some(_), Some(_)) if tool_arm => Ok(Configuration::Maintenance),
            (Some(base), None) => Ok(base),
            (Some(_), Some(kind)) => Err(InterconnectError::Unrecognized(format!(
                "right port holds a {kind:?}"
            ))),
            (None, _) => Err(InterconnectError::Unrecognized(
                "no known mounting pattern".into(),
            )),
        }
    }

    /// Arm at a MIM port whose other end is anchored or held by a station module.
    fn arm_reaches_fixed_point(&self, mim: &ModuleAsset, role: PortRole) -> bool {
        let Some(distal) = self.distal_port(mim, role) else {
            return false;
        };
        if self.anchor_of(&distal.id).is_some() {
            return true;
        }
        self.peer_of(&distal.id)
            .and_then(|p| self.port(p))
            .and_then(|p| self.module(&p.owner))
            .is_some_and(|m| m.kind.is_grounded())
    }

    /// Power budget for every module in the assembly.
    pub fn power_check(&self, bus_voltage_v: f64, limit_a: f64) -> PowerReport {
        let total_power_w: f64 = self.modules.iter().map(ModuleAsset::total_draw_w).sum();
        let total_current_a = total_power_w / bus_voltage_v;
        PowerReport {
            total_power_w,
            bus_voltage_v,
            total_current_a,
            limit_a,
            within_limit: total_current_a <= limit_a,
        }
    }

    pub fn power_check_default(&self) -> PowerReport {
        self.power_check(DEFAULT_BUS_VOLTAGE_V, DEFAULT_CURRENT_LIMIT_A)
    }

    /// Shortest route for a topic message over fully coupled links.
    ///
    /// Breadth-first with neighbors visited in id order, so the returned path
    /// is deterministic. The topic does not influence routing.
    pub fn route_message(&self, from: &str, to: &str, _topic: &str) -> Result<Route> {
        for id in [from, to] {
            if self.module(id).is_none() {
                return Err(InterconnectError::UnknownModule(id.to_string()));
            }
        }
        let adj = self.adjacency(PortState::FullCoupled);
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        parent.insert(from, from);
        while let Some(m) = queue.pop_front() {
            if m == to {
                let mut path = vec![to.to_string()];
                let mut cur = to;
                while cur != from {
                    cur = parent[cur];
                    path.push(cur.to_string());
                }
                path.reverse();
                return Ok(Route::Delivered {
                    hops: path.len() - 1,
                    path,
                });
            }
            for &n in &adj[m] {
                if !parent.contains_key(n) {
                    parent.insert(n, m);
                    queue.push_back(n);
                }
            }
        }
        Ok(Route::NoRoute)
    }
}

pub fn couple(assembly: &AssemblyGraph, port_a: &str, port_b: &str) -> Result<AssemblyGraph> {
    assembly.couple(port_a, port_b)
}

pub fn advance_coupling(assembly: &AssemblyGraph, port: &str) -> Result<AssemblyGraph> {
    assembly.advance_coupling(port)
}

pub fn decouple(assembly: &AssemblyGraph, port: &str) -> Result<AssemblyGraph> {
    assembly.decouple(port)
}

pub fn validate_configuration(assembly: &AssemblyGraph) -> Result<Configuration> {
    assembly.validate_configuration()
}

pub fn power_check(assembly: &AssemblyGraph, bus_voltage_v: f64, limit_a: f64) -> PowerReport {
    assembly.power_check(bus_voltage_v, limit_a)
}

pub fn route_message(assembly: &AssemblyGraph, from: &str, to: &str, topic: &str) -> Result<Route> {
    assembly.route_message(from, to, topic)
}

//! Tool storage and tool use by the arm on the MIM's tool port.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interconnect::{AssemblyGraph, InterconnectError, PortRole, PortState};
use crate::scene::Pose;
use crate::sensors::SensorHead;

pub const GRIP_MIN_CM: f64 = 0.5;
pub const GRIP_MAX_CM: f64 = 10.0;
pub const TORQUE_MIN_NM: f64 = 2.7;
pub const TORQUE_MAX_NM: f64 = 30.0;
pub const SLOTS: usize = 2;
/// Worksites must sit inside this cone around the sensor boresight.
pub const OBSERVE_HALF_ANGLE_DEG: f64 = 60.0;
pub const OBSERVE_RANGE_M: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaintenanceError {
    #[error("`{0}` is not an arm on the MIM tool port")]
    NoArmOnToolPort(String),
    #[error("slot {0} is empty")]
    EmptySlot(usize),
    #[error("slot {0} is occupied")]
    SlotOccupied(usize),
    #[error("no slot {0}")]
    InvalidSlot(usize),
    #[error("tool compartment lid is closed")]
    LidClosed,
    #[error("arm `{0}` holds no tool")]
    NothingHeld(String),
    #[error("arm `{0}` already holds a tool")]
    HandsFull(String),
    #[error("arm `{arm}` holds a {held:?}, needs a {needed:?}")]
    WrongTool {
        arm: String,
        held: ToolKind,
        needed: ToolKind,
    },
    #[error("worksite not observable: {0}")]
    NotObserved(String),
    #[error("unknown fastener `{0}`")]
    UnknownFastener(String),
    #[error("no tool `{0}` at the worksite")]
    NotAtWorksite(String),
    #[error(transparent)]
    Interconnect(#[from] InterconnectError),
}

type Result<T> = std::result::Result<T, MaintenanceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Gripper,
    TorqueWrench,
}

impl ToolKind {
    /// Inclusive working envelope: cm for the gripper, N·m for the wrench.
    pub fn envelope(self) -> [f64; 2] {
        match self {
            ToolKind::Gripper => [GRIP_MIN_CM, GRIP_MAX_CM],
            ToolKind::TorqueWrench => [TORQUE_MIN_NM, TORQUE_MAX_NM],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tool {
    pub id: String,
    pub kind: ToolKind,
}

impl Tool {
    pub fn new(id: impl Into<String>, kind: ToolKind) -> Self {
        Self {
            id: id.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolStore {
    pub slots: [Option<Tool>; SLOTS],
    pub lid_open: bool,
}

impl Default for ToolStore {
    fn default() -> Self {
        Self {
            slots: [
                Some(Tool::new("gripper", ToolKind::Gripper)),
                Some(Tool::new("torque_wrench", ToolKind::TorqueWrench)),
            ],
            lid_open: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolLocation {
    Slot(usize),
    Arm(String),
    Worksite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspOutcome {
    Success,
    TooSmall,
    TooLarge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorqueOutcome {
    /// Fastener state after the operation.
    Success {
        fastened: bool,
    },
    BelowMinimum,
    AboveMaximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    EyeInHand,
    EyeToHand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub kind: ObservationKind,
    pub observer: String,
    pub range_m: f64,
    pub off_axis_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum MaintenanceAction {
    OpenLid,
    CloseLid,
    Retrieve {
        arm: String,
        slot: usize,
    },
    Stow {
        arm: String,
        slot: usize,
    },
    Grasp {
        arm: String,
        object_dim_cm: f64,
    },
    ApplyTorque {
        arm: String,
        fastener: String,
        torque_nm: f64,
    },
    SetDown {
        arm: String,
    },
    PickUp {
        arm: String,
        tool: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ActionOutcome {
    Done,
    Grasp { outcome: GraspOutcome },
    Torque { outcome: TorqueOutcome },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    #[serde(flatten)]
    pub action: MaintenanceAction,
    pub outcome: ActionOutcome,
    pub observations: Vec<Observation>,
}

/// MIM in maintenance configuration with its tool store, the fasteners at
/// one worksite and the sensor head watching it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceCell {
    pub assembly: AssemblyGraph,
    pub store: ToolStore,
    pub held: BTreeMap<String, Tool>,
    pub worksite_tools: Vec<Tool>,
    pub worksite: [f64; 3],
    pub fasteners: BTreeMap<String, bool>,
    pub head: SensorHead,
    pub log: Vec<LogEntry>,
}

impl MaintenanceCell {
    pub fn new(assembly: AssemblyGraph, head: SensorHead, worksite: [f64; 3]) -> Self {
        Self {
            assembly,
            store: ToolStore::default(),
            held: BTreeMap::new(),
            worksite_tools: Vec::new(),
            worksite,
            fasteners: BTreeMap::from([("bolt_1".to_string(), false)]),
            head,
            log: Vec::new(),
        }
    }

    /// Maintenance assembly on fixtures `f0`/`f1`, head at the origin
    /// looking along +z, worksite 1 m ahead.
    pub fn standard() -> Self {
        Self::new(
            AssemblyGraph::maintenance("f0", "f1").expect("static assembly is valid"),
            SensorHead::new(Pose::identity()),
            [0.0, 0.0, 1.0],
        )
    }

    pub fn open_lid(&mut self) {
        self.store.lid_open = true;
    }

    pub fn close_lid(&mut self) {
        self.store.lid_open = false;
    }

    /// `arm` must be the module fully coupled to the MIM's right port.
    fn check_tool_arm(&self, arm: &str) -> Result<()> {
        let ok = self.assembly.mims().next().is_some_and(|mim| {
            let on_port = self
                .assembly
                .module_on_role(mim, PortRole::Right)
                .is_some_and(|m| m.id == arm);
            let powered = mim
                .port_with_role(PortRole::Right)
                .and_then(|p| self.assembly.port(&p.id))
                .is_some_and(|p| p.state == PortState::FullCoupled);
            on_port && powered
        });
        if ok {
            Ok(())
        } else {
            Err(MaintenanceError::NoArmOnToolPort(arm.to_string()))
        }
    }

    fn check_slot(slot: usize) -> Result<()> {
        if slot < SLOTS {
            Ok(())
        } else {
            Err(MaintenanceError::InvalidSlot(slot))
        }
    }

    pub fn retrieve_tool(&mut self, arm: &str, slot: usize) -> Result<()> {
        self.check_tool_arm(arm)?;
        Self::check_slot(slot)?;
        if !self.store.lid_open {
            return Err(MaintenanceError::LidClosed);
        }
        if self.store.slots[slot].is_none() {
            return Err(MaintenanceError::EmptySlot(slot));
        }
        if self.held.contains_key(arm) {
            return Err(MaintenanceError::HandsFull(arm.to_string()));
        }
        let tool = self.store.slots[slot].take().expect("checked above");
        self.held.insert(arm.to_string(), tool);
        Ok(())
    }

    pub fn stow_tool(&mut self, arm: &str, slot: usize) -> Result<()> {
        self.check_tool_arm(arm)?;
        Self::check_slot(slot)?;
        if !self.held.contains_key(arm) {
            return Err(MaintenanceError::NothingHeld(arm.to_string()));
        }
        if self.store.slots[slot].is_some() {
            return Err(MaintenanceError::SlotOccupied(slot));
        }
        if !self.store.lid_open {
            return Err(MaintenanceError::LidClosed);
        }
        let tool = self.held.remove(arm).expect("checked above");
        self.store.slots[slot] = Some(tool);
        Ok(())
    }

    /// Put the held tool down at the worksite.
    pub fn set_down(&mut self, arm: &str) -> Result<()> {
        self.check_tool_arm(arm)?;
        let tool = self
            .held
            .remove(arm)
            .ok_or_else(|| MaintenanceError::NothingHeld(arm.to_string()))?;
        self.worksite_tools.push(tool);
        Ok(())
    }

    pub fn pick_up(&mut self, arm: &str, tool_id: &str) -> Result<()> {
        self.check_tool_arm(arm)?;
        if self.held.contains_key(arm) {
            return Err(MaintenanceError::HandsFull(arm.to_string()));
        }
        let i = self
            .worksite_tools
            .iter()
            .position(|t| t.id == tool_id)
            .ok_or_else(|| MaintenanceError::NotAtWorksite(tool_id.to_string()))?;
        let tool = self.worksite_tools.remove(i);
        self.held.insert(arm.to_string(), tool);
        Ok(())
    }

    fn held_kind(&self, arm: &str, needed: ToolKind) -> Result<()> {
        let tool = self
            .held
            .get(arm)
            .ok_or_else(|| MaintenanceError::NothingHeld(arm.to_string()))?;
        if tool.kind != needed {
            return Err(MaintenanceError::WrongTool {
                arm: arm.to_string(),
                held: tool.kind,
                needed,
            });
        }
        Ok(())
    }

    /// Eye-to-hand check: the worksite lies inside the sensor cone.
    pub fn observe_worksite(&self) -> Result<Observation> {
        let to_site = Vector3::from(self.worksite) - self.head.position();
        let range_m = to_site.norm();
        if !(range_m > 0.0) {
            return Err(MaintenanceError::NotObserved(
                "worksite coincides with the sensor".into(),
            ));
        }
        let cos = (to_site.dot(&self.head.boresight()) / range_m).clamp(-1.0, 1.0);
        let off_axis_deg = cos.acos().to_degrees();
        if off_axis_deg > OBSERVE_HALF_ANGLE_DEG {
            return Err(MaintenanceError::NotObserved(format!(
                "{off_axis_deg:.1}° off the boresight"
            )));
        }
        if range_m > OBSERVE_RANGE_M {
            return Err(MaintenanceError::NotObserved(format!(
                "{range_m:.3} m away"
            )));
        }
        Ok(Observation {
            kind: ObservationKind::EyeToHand,
            observer: "mim_sensor_head".into(),
            range_m,
            off_axis_deg,
        })
    }

    fn eye_in_hand(arm: &str) -> Observation {
        Observation {
            kind: ObservationKind::EyeInHand,
            observer: format!("{arm}.camera"),
            range_m: 0.0,
            off_axis_deg: 0.0,
        }
    }

    fn grasp_inner(&self, arm: &str, dim_cm: f64) -> Result<(GraspOutcome, Vec<Observation>)> {
        self.held_kind(arm, ToolKind::Gripper)?;
        let seen = self.observe_worksite()?;
        let [lo, hi] = ToolKind::Gripper.envelope();
        Ok(if dim_cm < lo {
            (GraspOutcome::TooSmall, vec![])
        } else if dim_cm > hi {
            (GraspOutcome::TooLarge, vec![])
        } else {
            (GraspOutcome::Success, vec![Self::eye_in_hand(arm), seen])
        })
    }

    fn torque_inner(
        &mut self,
        arm: &str,
        fastener: &str,
        torque_nm: f64,
    ) -> Result<(TorqueOutcome, Vec<Observation>)> {
        self.held_kind(arm, ToolKind::TorqueWrench)?;
        if !self.fasteners.contains_key(fastener) {
            return Err(MaintenanceError::UnknownFastener(fastener.to_string()));
        }
        let seen = self.observe_worksite()?;
        let [lo, hi] = ToolKind::TorqueWrench.envelope();
        Ok(if torque_nm < lo {
            (TorqueOutcome::BelowMinimum, vec![])
        } else if torque_nm > hi {
            (TorqueOutcome::AboveMaximum, vec![])
        } else {
            let state = self.fasteners.get_mut(fastener).expect("checked above");
            *state = !*state;
            (
                TorqueOutcome::Success { fastened: *state },
                vec![Self::eye_in_hand(arm), seen],
            )
        })
    }

    pub fn grasp(&mut self, arm: &str, object_dim_cm: f64) -> Result<GraspOutcome> {
        let action = MaintenanceAction::Grasp {
            arm: arm.to_string(),
            object_dim_cm,
        };
        match self.apply(&action)? {
            ActionOutcome::Grasp { outcome } => Ok(outcome),
            _ => unreachable!("grasp yields a grasp outcome"),
        }
    }

    pub fn apply_torque(
        &mut self,
        arm: &str,
        fastener: &str,
        torque_nm: f64,
    ) -> Result<TorqueOutcome> {
        let action = MaintenanceAction::ApplyTorque {
            arm: arm.to_string(),
            fastener: fastener.to_string(),
            torque_nm,
        };
        match self.apply(&action)? {
            ActionOutcome::Torque { outcome } => Ok(outcome),
            _ => unreachable!("torque yields a torque outcome"),
        }
    }

    /// Run one action and append it to the log, failures included.
    pub fn apply(&mut self, action: &MaintenanceAction) -> Result<ActionOutcome> {
        use MaintenanceAction as A;
        let result: Result<(ActionOutcome, Vec<Observation>)> = match action {
            A::OpenLid => {
                self.open_lid();
                Ok((ActionOutcome::Done, vec![]))
            }
            A::CloseLid => {
                self.close_lid();
                Ok((ActionOutcome::Done, vec![]))
            }
            A::Retrieve { arm, slot } => self
                .retrieve_tool(arm, *slot)
                .map(|_| (ActionOutcome::Done, vec![])),
            A::Stow { arm, slot } => self
                .stow_tool(arm, *slot)
                .map(|_| (ActionOutcome::Done, vec![])),
            A::SetDown { arm } => self.set_down(arm).map(|_| (ActionOutcome::Done, vec![])),
            A::PickUp { arm, tool } => self
                .pick_up(arm, tool)
                .map(|_| (ActionOutcome::Done, vec![])),
            A::Grasp { arm, object_dim_cm } => self
                .grasp_inner(arm, *object_dim_cm)
                .map(|(outcome, obs)| (ActionOutcome::Grasp { outcome }, obs)),
            A::ApplyTorque {
                arm,
                fastener,
                torque_nm,
            } => self
                .torque_inner(arm, fastener, *torque_nm)
                .map(|(outcome, obs)| (ActionOutcome::Torque { outcome }, obs)),
        };
        let step = self.log.len() + 1;
        match result {
            Ok((outcome, observations)) => {
                self.log.push(LogEntry {
                    step,
                    action: action.clone(),
                    outcome: outcome.clone(),
                    observations,
                });
                Ok(outcome)
            }
            Err(e) => {
                self.log.push(LogEntry {
                    step,
                    action: action.clone(),
                    outcome: ActionOutcome::Error {
                        message: e.to_string(),
                    },
                    observations: vec![],
                });
                Err(e)
            }
        }
    }

    /// Where every tool currently is, by tool id. A tool found in two places
    /// appears twice in its entry.
    pub fn tool_locations(&self) -> BTreeMap<String, Vec<ToolLocation>> {
        let mut out: BTreeMap<String, Vec<ToolLocation>> = BTreeMap::new();
        for (i, slot) in self.store.slots.iter().enumerate() {
            if let Some(t) = slot {
                out.entry(t.id.clone())
                    .or_default()
                    .push(ToolLocation::Slot(i));
            }
        }
        for (arm, t) in &self.held {
            out.entry(t.id.clone())
                .or_default()
                .push(ToolLocation::Arm(arm.clone()));
        }
        for t in &self.worksite_tools {
            out.entry(t.id.clone())
                .or_default()
                .push(ToolLocation::Worksite);
        }
        out
    }
}

pub fn retrieve_tool(cell: &MaintenanceCell, arm: &str, slot: usize) -> Result<MaintenanceCell> {
    let mut next = cell.clone();
    next.retrieve_tool(arm, slot)?;
    Ok(next)
}

pub fn stow_tool(cell: &MaintenanceCell, arm: &str, slot: usize) -> Result<MaintenanceCell> {
    let mut next = cell.clone();
    next.stow_tool(arm, slot)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARM: &str = "wm_tool";

    fn holding(kind: ToolKind) -> MaintenanceCell {
        let mut cell = MaintenanceCell::standard();
        cell.open_lid();
        let slot = if kind == ToolKind::Gripper { 0 } else { 1 };
        cell.retrieve_tool(ARM, slot).unwrap();
        cell
    }

    #[test]
    fn maintenance_assembly_retrieves_gripper() {
        let cell = holding(ToolKind::Gripper);
        assert_eq!(cell.held[ARM].kind, ToolKind::Gripper);
        assert!(cell.store.slots[0].is_none());
    }

    #[test]
    fn retrieve_errors() {
        let mut cell = MaintenanceCell::standard();
        assert_eq!(cell.retrieve_tool(ARM, 0), Err(MaintenanceError::LidClosed));
        cell.open_lid();
        assert_eq!(
            cell.retrieve_tool("wm_left", 0),
            Err(MaintenanceError::NoArmOnToolPort("wm_left".into()))
        );
        cell.retrieve_tool(ARM, 0).unwrap();
        cell.stow_tool(ARM, 0).unwrap();
        cell.store.slots[0] = None;
        assert_eq!(
            cell.retrieve_tool(ARM, 0),
            Err(MaintenanceError::EmptySlot(0))
        );
    }

    #[test]
    fn stow_round_trip_and_errors() {
        let before = {
            let mut c = MaintenanceCell::standard();
            c.open_lid();
            c
        };
        let after = stow_tool(&retrieve_tool(&before, ARM, 1).unwrap(), ARM, 1).unwrap();
        assert_eq!(after, before);

        let held = retrieve_tool(&before, ARM, 1).unwrap();
        assert_eq!(
            stow_tool(&held, ARM, 0),
            Err(MaintenanceError::SlotOccupied(0))
        );
        assert_eq!(
            stow_tool(&before, ARM, 0),
            Err(MaintenanceError::NothingHeld(ARM.into()))
        );
    }

    #[test]
    fn grasp_envelope_is_inclusive() {
        let mut cell = holding(ToolKind::Gripper);
        assert_eq!(cell.grasp(ARM, 5.0), Ok(GraspOutcome::Success));
        assert_eq!(cell.grasp(ARM, 0.5), Ok(GraspOutcome::Success));
        assert_eq!(cell.grasp(ARM, 10.0), Ok(GraspOutcome::Success));
        assert_eq!(cell.grasp(ARM, 0.4), Ok(GraspOutcome::TooSmall));
        assert_eq!(cell.grasp(ARM, 10.1), Ok(GraspOutcome::TooLarge));
    }

    #[test]
    fn torque_envelope_and_toggle() {
        let mut cell = holding(ToolKind::TorqueWrench);
        assert_eq!(
            cell.apply_torque(ARM, "bolt_1", 15.0),
            Ok(TorqueOutcome::Success { fastened: true })
        );
        assert_eq!(
            cell.apply_torque(ARM, "bolt_1", 2.7),
            Ok(TorqueOutcome::Success { fastened: false })
        );
        assert_eq!(
            cell.apply_torque(ARM, "bolt_1", 30.0),
            Ok(TorqueOutcome::Success { fastened: true })
        );
        assert_eq!(
            cell.apply_torque(ARM, "bolt_1", 2.0),
            Ok(TorqueOutcome::BelowMinimum)
        );
        assert_eq!(
            cell.apply_torque(ARM, "bolt_1", 31.0),
            Ok(TorqueOutcome::AboveMaximum)
        );
        assert!(cell.fasteners["bolt_1"]);
    }

    #[test]
    fn wrong_tool_and_unobserved_worksite() {
        let mut cell = holding(ToolKind::Gripper);
        assert!(matches!(
            cell.apply_torque(ARM, "bolt_1", 10.0),
            Err(MaintenanceError::WrongTool { .. })
        ));
        cell.worksite = [2.0, 0.0, 0.5];
        assert!(matches!(
            cell.grasp(ARM, 5.0),
            Err(MaintenanceError::NotObserved(_))
        ));
        cell.worksite = [0.0, 0.0, 2.5];
        assert!(matches!(
            cell.grasp(ARM, 5.0),
            Err(MaintenanceError::NotObserved(_))
        ));
    }

    #[test]
    fn successes_log_both_viewpoints() {
        let mut cell = holding(ToolKind::Gripper);
        cell.grasp(ARM, 3.0).unwrap();
        let entry = cell.log.last().unwrap();
        let kinds: Vec<ObservationKind> = entry.observations.iter().map(|o| o.kind).collect();
        assert_eq!(
            kinds,
            vec![ObservationKind::EyeInHand, ObservationKind::EyeToHand]
        );
    }

    fn alphabet() -> Vec<MaintenanceAction> {
        use MaintenanceAction as A;
        let mut out = vec![A::OpenLid, A::CloseLid];
        for arm in [ARM, "wm_left"] {
            for slot in 0..SLOTS {
                out.push(A::Retrieve {
                    arm: arm.into(),
                    slot,
                });
                out.push(A::Stow {
                    arm: arm.into(),
                    slot,
                });
            }
        }
        out.push(A::Grasp {
            arm: ARM.into(),
            object_dim_cm: 5.0,
        });
        out.push(A::ApplyTorque {
            arm: ARM.into(),
            fastener: "bolt_1".into(),
            torque_nm: 15.0,
        });
        out.push(A::SetDown { arm: ARM.into() });
        out.push(A::PickUp {
            arm: ARM.into(),
            tool: "gripper".into(),
        });
        out.push(A::PickUp {
            arm: ARM.into(),
            tool: "torque_wrench".into(),
        });
        out
    }

    fn conserved(cell: &MaintenanceCell) -> bool {
        let locs = cell.tool_locations();
        locs.len() == 2 && locs.values().all(|l| l.len() == 1)
    }

    fn explore(
        cell: &MaintenanceCell,
        depth: usize,
        actions: &[MaintenanceAction],
        visited: &mut usize,
    ) {
        *visited += 1;
        assert!(conserved(cell), "{:?}", cell.log);
        if depth == 0 {
            return;
        }
        for a in actions {
            let mut next = cell.clone();
            let before = next.clone();
            if next.apply(a).is_err() {
                // failed actions change nothing but the log
                next.log.pop();
                assert_eq!(next, before);
            }
            explore(&next, depth - 1, actions, visited);
        }
    }

    #[test]
    fn tools_are_conserved_over_short_sequences() {
        let actions = alphabet();
        let mut visited = 0;
        explore(&MaintenanceCell::standard(), 4, &actions, &mut visited);
        let n = actions.len();
        assert_eq!(visited, (0..=4).map(|d| n.pow(d)).sum::<usize>());
    }
}

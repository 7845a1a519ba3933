"""Day-ahead V2G fleet scheduling with multi-objective Harris Hawks Optimization."""

from .feasibility import Violation, ViolationKind, repair_schedule, validate_schedule
from .fleet import ChargingStation, ElectricVehicle, Location, OperationTimeConfig, PreferenceSet, Priority
from .grid import Action, ConstraintConfig, EnergyProfile, ScheduleMatrix, SlotClass
from .hho import HHOParams, OptimizationResult, optimize
from .metrics import kpi_report
from .scenario import FleetSpec, Scenario, ScenarioConfig, assemble_scenario, desk_scenario

__all__ = [
    "Action", "ChargingStation", "ConstraintConfig", "ElectricVehicle", "EnergyProfile", "FleetSpec",
    "HHOParams", "Location", "OperationTimeConfig", "OptimizationResult", "PreferenceSet", "Priority",
    "Scenario", "ScenarioConfig", "ScheduleMatrix", "SlotClass", "Violation", "ViolationKind",
    "assemble_scenario", "desk_scenario", "kpi_report", "optimize", "repair_schedule", "validate_schedule",
]

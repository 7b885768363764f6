"""Stage tracking for pipeline runs (matrix builds, fits, solver runs, simulations)"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional
from datetime import datetime
import json
import os


@dataclass
class StageRecord:
    """Single pipeline stage record"""
    timestamp: str
    component: str
    label: str
    seconds: float
    iterations: int = 0
    converged: Optional[bool] = None


@dataclass
class RunTracker:
    """Tracks wall time and solver iterations across pipeline components"""
    stages: List[StageRecord] = field(default_factory=list)
    session_start: str = field(default_factory=lambda: datetime.now().isoformat())

    def track_stage(
        self,
        component: str,
        label: str,
        seconds: float,
        iterations: int = 0,
        converged: Optional[bool] = None
    ) -> StageRecord:
        """Record one finished stage

        Args:
            component: Component name (e.g., "recovery", "eme", "charfit", "sim")
            label: Short description of what ran
            seconds: Wall time in seconds
            iterations: Solver iterations, if any
            converged: Solver convergence flag, if any

        Returns:
            The stored record
        """
        record = StageRecord(
            timestamp=datetime.now().isoformat(),
            component=component,
            label=label,
            seconds=seconds,
            iterations=iterations,
            converged=converged
        )
        self.stages.append(record)
        return record

    def get_summary(self) -> Dict:
        """Get run summary

        Returns:
            Dictionary with totals and a per-component breakdown
        """
        by_component = {}
        for stage in self.stages:
            if stage.component not in by_component:
                by_component[stage.component] = {
                    "stages": 0,
                    "seconds": 0.0,
                    "iterations": 0,
                    "not_converged": 0,
                }
            entry = by_component[stage.component]
            entry["stages"] += 1
            entry["seconds"] += stage.seconds
            entry["iterations"] += stage.iterations
            if stage.converged is False:
                entry["not_converged"] += 1

        return {
            "session_start": self.session_start,
            "total_stages": len(self.stages),
            "total_seconds": sum(stage.seconds for stage in self.stages),
            "by_component": by_component,
        }

    def print_summary(self):
        """Print formatted run summary"""
        summary = self.get_summary()

        print("\n" + "="*80)
        print("RUN SUMMARY")
        print("="*80)
        print(f"Session started: {summary['session_start']}")
        print(f"Stages: {summary['total_stages']}")
        print(f"Wall time: {summary['total_seconds']:.2f}s")

        print("\n" + "-"*80)
        print("BY COMPONENT")
        print("-"*80)
        for component, stats in summary["by_component"].items():
            print(f"{component:20} | Stages: {stats['stages']:3} | Time: {stats['seconds']:8.2f}s | "
                  f"Iterations: {stats['iterations']:,} | Not converged: {stats['not_converged']}")

        print("="*80 + "\n")

    def save_to_file(self, filepath: str = None):
        """Save run summary to JSON file

        Args:
            filepath: Optional file path (defaults to run_reports/run_TIMESTAMP.json)
        """
        if filepath is None:
            os.makedirs("run_reports", exist_ok=True)
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            filepath = f"run_reports/run_{timestamp}.json"

        summary = self.get_summary()
        summary["stages"] = [
            {
                "timestamp": stage.timestamp,
                "component": stage.component,
                "label": stage.label,
                "seconds": stage.seconds,
                "iterations": stage.iterations,
                "converged": stage.converged
            }
            for stage in self.stages
        ]

        with open(filepath, 'w') as f:
            json.dump(summary, f, indent=2)

        print(f"Run summary saved to: {filepath}")
        return filepath


# Global run tracker instance
_global_tracker = None


def get_global_tracker() -> RunTracker:
    """Get or create the global run tracker"""
    global _global_tracker
    if _global_tracker is None:
        _global_tracker = RunTracker()
    return _global_tracker


def reset_global_tracker():
    """Reset the global run tracker"""
    global _global_tracker
    _global_tracker = RunTracker()


def track_stage(component: str, label: str, seconds: float, iterations: int = 0,
                converged: Optional[bool] = None) -> StageRecord:
    """Convenience function to record a stage on the global tracker"""
    return get_global_tracker().track_stage(component, label, seconds, iterations, converged)

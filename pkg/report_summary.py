"""
Report Summary Script
Reads a results directory and prints the pass/fail state of every report,
plus run statistics parsed from the latest log
"""
import re
import sys
from pathlib import Path

from svwave.persistence import ResultStore


class ReportSummary:
    """Summarize the reports and log of a results directory"""

    def __init__(self, output_dir="results", log_file="logs/latest.log"):
        self.output_dir = Path(output_dir)
        self.log_file = Path(log_file)
        self.runs = []

    def summarize(self):
        """Print the summary; returns 0 if every report passed"""
        if not self.output_dir.exists():
            print(f"Error: Results directory not found: {self.output_dir}")
            return 1

        print("=" * 80)
        print("EXPERIMENT SUMMARY")
        print("=" * 80)
        print()

        store = ResultStore(self.output_dir)
        reports = store.list_reports()
        if not reports:
            print("No reports found.")
            return 1

        for entry in reports:
            self._print_report(store.load_report(entry['subcommand']), entry)

        if self.log_file.exists():
            self._parse_log()
            self._print_log_statistics()

        failed = [entry['subcommand'] for entry in reports if not entry['passed']]
        print("=" * 80)
        print(f"{len(reports) - len(failed)}/{len(reports)} reports passed")
        if failed:
            print(f"Failed: {', '.join(failed)}")
        return 0 if not failed else 1

    def _print_report(self, report, entry):
        """Print one subcommand's checks"""
        status = "PASS" if entry['passed'] else "FAIL"
        print("─" * 80)
        print(f"{entry['subcommand'].upper()} [{status}]  {entry['checks']} checks, {entry['failed']} failed")
        print("─" * 80)
        for check in report.get('checks', []):
            mark = "✓" if check.get('passed') else "✗"
            print(f"  {mark} {check['name']}: measured {check['measured']:.6g}, bound {check.get('bound')}")
        error = report.get('error')
        if error:
            print(f"\n  Error: {error.get('type')}: {error.get('message')}")
        print()

    def _parse_log(self):
        """Collect stopping-time crossings and slow operations from the log"""
        with open(self.log_file, 'r', encoding='utf-8') as f:
            for line in f:
                parts = line.strip().split(" - ", 3)
                if len(parts) < 4:
                    continue
                message = parts[3]
                stop = re.search(r'Stopping time reached at t=(\S+): energy (\S+) >= k=(\S+)', message)
                if stop:
                    self.runs.append(('stopping', float(stop.group(1)), float(stop.group(3))))
                    continue
                slow = re.search(r'Performance: (.*) took ([\d.]+)ms \(SLOW\)', message)
                if slow:
                    self.runs.append(('slow', slow.group(1), float(slow.group(2))))

    def _print_log_statistics(self):
        stops = [r for r in self.runs if r[0] == 'stopping']
        slow = [r for r in self.runs if r[0] == 'slow']
        if not stops and not slow:
            return
        print("LOG STATISTICS:")
        for _, t, k in stops:
            print(f"  • Stopping time t={t:g} at level k={k:g}")
        for _, operation, ms in slow:
            print(f"  • Slow: {operation} ({ms / 1000:.1f}s)")
        print()


def main():
    """Run the summary"""
    output_dir = sys.argv[1] if len(sys.argv) > 1 else "results"
    return ReportSummary(output_dir).summarize()


if __name__ == "__main__":
    sys.exit(main())

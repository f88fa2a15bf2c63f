import os
import time
import tracemalloc
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

from src.pib.infotheory import channel_joint, mutual_information
from src.pib.solver import SolverConfig, ba_solve
from src.pib.world import builtin_world, joint_model


class Benchmark:
    """
    Timing suite for the bottleneck solver.

    This class provides tools to:
    1. Build joint models of growing size from the built-in worlds
    2. Measure solve time, peak memory and iteration counts
    3. Compare serial and threaded restarts
    4. Write a CSV of raw measurements and a text summary

    Performance metrics tracked:
    - Solve time (ms)
    - Peak memory usage (kB)
    - Iterations of the best restart
    - I(theta;X_F) reached (nats)
    """

    def __init__(self, output_dir: str = "benchmark_results"):
        """
        Initialize the benchmark suite.

        Args:
            output_dir (str): Directory for storing benchmark results and reports.
        """
        self.output_dir = output_dir
        self.results: List[Dict] = []
        os.makedirs(output_dir, exist_ok=True)

    def measure_memory(self, func, *args) -> float:
        """
        Measure peak memory usage of a function.

        Returns:
            float: Peak memory usage in kilobytes
        """
        tracemalloc.start()
        func(*args)
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        return peak / 1024

    def run_benchmark(
        self,
        worlds: Sequence[str],
        sizes: Sequence[Tuple[int, int]],
        betas: Sequence[float],
        threads: Sequence[int] = (1,),
        restarts: int = 8,
        seed: int = 7,
    ) -> None:
        """
        Time ba_solve for every (world, (N, M), beta, threads) combination.

        Args:
            worlds: Built-in world names
            sizes: (n_past, n_future) pairs
            betas: Trade-off values in [0, 1)
            threads: Restart pool sizes to compare
            restarts: Restarts per solve
            seed: Base seed
        """
        self.results.clear()
        total_steps = len(worlds) * len(sizes) * len(betas) * len(threads)
        current_step = 0

        for name in worlds:
            world = builtin_world(name)
            for n_past, n_future in sizes:
                joint = joint_model(world, n_past, n_future)
                k_theta = min(joint.n_past_datasets, world.k_phi + 1)
                for beta in betas:
                    cfg = SolverConfig(beta=beta, k_theta=k_theta, restarts=restarts, seed=seed)
                    for n_threads in threads:
                        current_step += 1
                        print(
                            f"Running benchmark: {current_step}/{total_steps} - "
                            f"World: {name}, N={n_past}, M={n_future}, beta={beta:g}, threads={n_threads}",
                            end="\r",
                        )
                        start = time.perf_counter()
                        result = ba_solve(joint, cfg, threads=n_threads)
                        elapsed = time.perf_counter() - start
                        memory = self.measure_memory(ba_solve, joint, cfg, n_threads)
                        cj = channel_joint(joint, result.channel)
                        self.results.append(
                            {
                                "world": name,
                                "n_past": n_past,
                                "n_future": n_future,
                                "past_datasets": joint.n_past_datasets,
                                "k_theta": k_theta,
                                "beta": beta,
                                "threads": n_threads,
                                "solve_time_ms": 1000 * elapsed,
                                "memory_kb": memory,
                                "iterations": result.diagnostics.iterations,
                                "converged": result.diagnostics.converged,
                                "mi_theta_future": mutual_information(cj.future_theta()),
                            }
                        )

        print("\nBenchmark completed.")

    def plot_figure(
        self,
        data: pd.DataFrame,
        x: str,
        y: str,
        xlabel: str,
        ylabel: str,
        title: str,
        filename: str,
        log_scale_y: bool = False,
    ) -> None:
        """
        Plot one line per (world, threads) series, averaged over beta.

        Args:
            data: DataFrame containing benchmark results
            x: Column name for x-axis
            y: Column name for y-axis
            xlabel: X-axis label
            ylabel: Y-axis label
            title: Plot title
            filename: Output file path
            log_scale_y: Use logarithmic scale for y-axis
        """
        plt.figure(figsize=(15, 10))
        for (world, n_threads), series in data.groupby(["world", "threads"], sort=True):
            points = series.groupby(x, sort=True)[y].mean()
            plt.plot(points.index, points.values, marker="o", label=f"{world}, {n_threads} thread(s)")

        if log_scale_y:
            plt.yscale("log")

        plt.xscale("log")
        plt.xlabel(xlabel + " [Log Scale]")
        plt.ylabel(ylabel + " [Log Scale]" if log_scale_y else ylabel)
        plt.title(title)
        plt.legend()
        plt.tight_layout()
        plt.savefig(filename)
        plt.close()

    def generate_report(self) -> None:
        """
        Write benchmark_results.csv, the timing and memory plots, and a per-world
        text summary to benchmark_report.txt.
        """
        df = pd.DataFrame(self.results)
        df.to_csv(
            os.path.join(self.output_dir, "benchmark_results.csv"),
            index=False,
            float_format="%.6g",
            lineterminator="\n",
        )

        self.plot_figure(
            data=df,
            x="past_datasets",
            y="solve_time_ms",
            xlabel="Past datasets",
            ylabel="Solve Time (ms)",
            title="Solve Time vs Past Datasets",
            filename=os.path.join(self.output_dir, "solve_time.png"),
            log_scale_y=True,
        )
        self.plot_figure(
            data=df,
            x="past_datasets",
            y="memory_kb",
            xlabel="Past datasets",
            ylabel="Memory Usage (kB)",
            title="Memory Usage vs Past Datasets",
            filename=os.path.join(self.output_dir, "memory_usage.png"),
        )

        with open(os.path.join(self.output_dir, "benchmark_report.txt"), "w", encoding="utf-8") as f:
            f.write("Benchmark Summary\n")
            f.write("==================\n\n")
            f.write(
                f"{'World':<8}{'N':<4}{'M':<4}{'Threads':<10}{'Avg Solve Time (ms)':<22}"
                f"{'Memory (kB)':<14}{'Avg Iterations':<16}\n"
            )
            f.write("=" * 78 + "\n")

            grouped = df.groupby(["world", "n_past", "n_future", "threads"], sort=True)
            for (world, n_past, n_future, n_threads), group in grouped:
                f.write(
                    f"{world:<8}{n_past:<4}{n_future:<4}{n_threads:<10}"
                    f"{group['solve_time_ms'].mean():<22.4f}"
                    f"{group['memory_kb'].mean():<14.1f}"
                    f"{group['iterations'].mean():<16.1f}\n"
                )

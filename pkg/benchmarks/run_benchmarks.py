import os
import sys
import argparse

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from benchmarks.benchmark import Benchmark


def _size_pair(text: str):
    n_past, n_future = (int(part) for part in text.split(","))
    return n_past, n_future


def main():
    parser = argparse.ArgumentParser(description="Run bottleneck solver benchmarks")
    parser.add_argument("--worlds", nargs="+", default=["w1", "w2"], help="Built-in worlds to solve")
    parser.add_argument("--sizes", type=_size_pair, nargs="+", default=[(1, 1), (2, 1), (3, 2), (4, 2)],
                        help="n_past,n_future pairs")
    parser.add_argument("--betas", type=float, nargs="+", default=[0.1, 0.5, 0.9], help="Trade-off values in [0, 1)")
    parser.add_argument("--threads", type=int, nargs="+", default=[1, 4], help="Restart pool sizes to compare")
    parser.add_argument("--output-dir", default="benchmark_results", help="Directory for benchmark results")
    args = parser.parse_args()

    benchmark = Benchmark(args.output_dir)

    print("Running benchmarks...")
    print("===================")
    print(f"Worlds: {', '.join(args.worlds)}")
    print(f"Sizes: {len(args.sizes)}, betas: {len(args.betas)}")
    print()

    benchmark.run_benchmark(worlds=args.worlds, sizes=args.sizes, betas=args.betas, threads=args.threads)

    print("\nGenerating reports...")
    benchmark.generate_report()

    print(f"\nBenchmark results saved to {args.output_dir}")
    print("Files generated:")
    print(f"- {args.output_dir}/benchmark_results.csv")
    print(f"- {args.output_dir}/benchmark_report.txt")
    print(f"- {args.output_dir}/solve_time.png")
    print(f"- {args.output_dir}/memory_usage.png")


if __name__ == "__main__":
    main()

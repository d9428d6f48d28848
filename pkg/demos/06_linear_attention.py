"""Quadratic vs linear attention cost, measured by the op counter.

Projecting keys and values from n to k=256 rows turns the attention stage
from O(n^2) into O(n k). The instrumented counter confirms the analytic
model exactly, and at n=1024 the attention map shrinks 4x.
"""

from styleattn import verify

r = verify.check_complexity(n_list=(256, 1024, 4096), k_lin=256, seed=0)

print(f"{'n':>6} {'full FLOPs':>14} {'projected FLOPs':>16} {'map elems':>12} {'proj map':>10}")
for row in r.details["rows"]:
    print(f"{row['n']:>6} {row['full']['flops']:>14,} {row['linformer']['flops']:>16,} "
          f"{row['map_elements_full']:>12,} {row['map_elements_linformer']:>10,}")

m = r.measured
print(f"\nlinear fit on projected path:  R^2 = {m['linformer_linear_r2']:.6f}")
print(f"quadratic fit on full path:    R^2 = {m['full_quadratic_r2']:.6f}")
print(f"linear fit on full path:       R^2 = {m['full_linear_r2']:.6f}  (visibly not linear)")
print(f"analytic model == counter:     {m['analytic_matches_counter']}")
print(f"attention-map reduction @1024: {m['map_reduction_at_1024']}x")
print("\nwall-clock seconds are in the report details (hardware-dependent,")
print("reported but never asserted).")

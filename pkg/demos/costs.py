"""Print the modeled MAdd and memory comparison, then time one graph size.

    python3 demos/costs.py
"""

from gattn.profile import comparison_report, format_table, profile_setup, synthetic_setup

print("Modeled cost at d=48, k=8 (reference values on the right):")
print(format_table(comparison_report(skip_wall=True)))
print()
print("Measured on this machine at N=3000:")
print(format_table(profile_setup(synthetic_setup(3000, 48, k=8, seed=0), repeats=3), with_reference=False))

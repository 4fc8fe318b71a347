"""Built-in rule documents.

These are the canonical texts; the copies shipped under ``rules/`` at the
repository root must stay byte-identical (enforced by a test).
"""

DEFAULT_RULES = """\
# Default adaptation rules: protect the battery first, then tune the CPU
# sampling rate to its trend. Battery thresholds come from the "power"
# indicator's configured too_low level, not from this file.

rule battery_low_keep_power salience 100 {
  when indicator "power" in state too_low
  then select_indicators keep "power"
}

rule battery_ok_restore_all salience 100 {
  when indicator "power" not in state too_low
  then select_indicators all
}

rule cpu_rate_when_stable salience 10 {
  when indicator "cpu" in state stable
  then change_rate "cpu" proportional
}

rule cpu_rate_when_unstable salience 10 {
  when indicator "cpu" in state unstable
  then change_rate "cpu" proportional
}
"""

RQ1_RULES = """\
# Rate adaptation tuned for the synthetic scenario benchmarks: drop to the
# sampling floor as soon as the indicator turns unstable, back off toward the
# ceiling only after sustained stability. The floor matches the rq1 preset's
# r_min; the long stability streak keeps one quiet stretch of an erratic
# signal from slowing the sampler down.

rule fast_sampling_when_unstable salience 20 {
  when indicator "cpu" in state unstable
  then change_rate "cpu" to 5
}

rule slow_sampling_when_stable salience 10 {
  when indicator "cpu" in state stable and streak("cpu", stable) >= 8
  then change_rate "cpu" proportional
}
"""

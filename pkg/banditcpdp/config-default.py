# Site settings - copy this file to config.py and replace example paths with your own.
# Directory holding one comma-separated file per project (DefectData CK exports),
# used by experiment configurations with `dataset: site`.
dataset_dir = '/Users/banditcpdp_example_path/defectdata'
# Where run reports, manifests and result cubes are written.
output_dir = '/Users/banditcpdp_example_path/runs'
# Where single repetition traces are written by `banditcpdp trace`.
trace_dir = '/Users/banditcpdp_example_path/traces'
# Processes for concurrent repetitions (None: all processors, 1: in-process).
nprocesses = 1
log_level = 'INFO'

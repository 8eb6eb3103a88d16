import os

# Pin BLAS to one core before numpy loads: acceptance timings are quoted
# for a single CPU core, and this keeps runtimes stable across machines.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

"""Style-vector-driven transformer image generator at desk scale.

Subpackages and modules map one-to-one onto the library's layers:

* ``substrate``  - tensors, autodiff, seeded RNG, FLOP counting
* ``styles``     - latent mapping and the modulation/demodulation algebra
* ``attention``  - many-head self-attention and the low-rank projection path
* ``encoder``    - the style-injected encoder block with ablation variants
* ``generator``  - full generators (transformer / linformer / hybrid modes)
* ``verify``     - statistical, gradient and complexity verification
* ``training``   - toy adversarial training on synthetic data
* ``cli``        - command-line surface
"""

__version__ = "0.1.0"

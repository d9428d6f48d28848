"""Desk-scale adversarial training on synthetic two-mode blob images.

The point is not image quality: it is proving that the full
modulation/demodulation graph trains stably end to end. The discriminator
is a small leaky-ReLU MLP; the loss is the non-saturating logistic pair

    L_D = softplus(D(fake)) + softplus(-D(real))      (+ optional R1)
    L_G = softplus(-D(fake))

with Adam(beta1=0, beta2=0.99). Every per-step random draw (data, latents,
noise) is derived functionally from (run seed, step index), so resuming
from a checkpoint continues bit-exactly without serializing RNG state.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .encoder import NoiseSpec
from .generator import GeneratorConfig, build
from .substrate import RngStream, Tensor
from .substrate.tensor import leaky_relu, matmul, softplus, tmean

CHECKPOINT_MAGIC = b"STCK"
CHECKPOINT_VERSION = 1

DISCRIMINATOR_PARAM_BUDGET = 100_000


# -- synthetic dataset ----------------------------------------------------------


class ToyDataset:
    """Two-mode Gaussian-blob images with i.i.d. pixel noise.

    Mode 0 is a warm blob in the upper-left, mode 1 a cool blob in the
    lower-right, both on a dark background. First and second moments are
    closed-form: the mean image is the average of the two mode templates,
    and the pixel covariance is the two-point mixture term plus
    noise_std^2 I.
    """

    def __init__(self, resolution=8, channels=3, noise_std=0.05, seed=0):
        self.resolution = resolution
        self.channels = channels
        self.noise_std = noise_std
        self.seed = seed
        self.templates = np.stack([
            self._blob((resolution * 0.3, resolution * 0.3), (0.9, 0.3, -0.2)),
            self._blob((resolution * 0.65, resolution * 0.65), (-0.3, 0.2, 0.9)),
        ])

    def _blob(self, center, color):
        r = self.resolution
        yy, xx = np.mgrid[0:r, 0:r].astype(np.float64) + 0.5
        d2 = (yy - center[0]) ** 2 + (xx - center[1]) ** 2
        bump = np.exp(-d2 / (2.0 * (r / 5.0) ** 2))
        img = np.full((r, r, self.channels), -0.8)
        for c in range(self.channels):
            img[:, :, c] += (color[c % len(color)] + 0.8) * bump
        return img

    def sample(self, count, stream=None, step=0):
        stream = stream or RngStream(self.seed, ("data", step))
        modes = stream.integers(0, 2, (count,))
        noise = stream.normal((count, self.resolution, self.resolution, self.channels))
        return self.templates[modes] + self.noise_std * noise

    def mean_image(self):
        return self.templates.mean(axis=0)

    def covariance(self):
        """Pixel covariance of the flattened image distribution (closed form)."""
        flat = self.templates.reshape(2, -1)
        diff = (flat[0] - flat[1])[:, None]
        return 0.25 * (diff @ diff.T) + self.noise_std**2 * np.eye(flat.shape[1])


def moment_metrics(samples, dataset):
    """Frobenius distances between sample and data pixel statistics."""
    samples = np.asarray(samples, dtype=np.float64)
    mean_dist = float(np.linalg.norm(samples.mean(axis=0) - dataset.mean_image()))
    flat = samples.reshape(len(samples), -1)
    cov = np.cov(flat, rowvar=False, bias=True)
    cov_dist = float(np.linalg.norm(cov - dataset.covariance()))
    return {"mean_distance": mean_dist, "cov_distance": cov_dist}


# -- discriminator ------------------------------------------------------------------


class ToyDiscriminator:
    """Flatten-MLP classifier emitting one logit per image."""

    def __init__(self, input_dim, widths=(128, 64), seed_stream=None, dtype=np.float64):
        stream = seed_stream or RngStream(0, ("disc",))
        self.input_dim = input_dim
        self.widths = tuple(widths)
        dims = [input_dim, *widths]
        self.weights, self.biases = [], []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            bound = 1.0 / np.sqrt(a)
            self.weights.append(Tensor(stream.child(f"w{i}").uniform(-bound, bound, (a, b)),
                                       requires_grad=True, dtype=dtype))
            self.biases.append(Tensor(np.zeros(b), requires_grad=True, dtype=dtype))
        bound = 1.0 / np.sqrt(dims[-1])
        self.w_out = Tensor(stream.child("w_out").uniform(-bound, bound, (dims[-1],)),
                            requires_grad=True, dtype=dtype)
        self.b_out = Tensor(np.zeros(()), requires_grad=True, dtype=dtype)
        if self.parameter_count() >= DISCRIMINATOR_PARAM_BUDGET:
            raise ValueError(
                f"discriminator has {self.parameter_count()} parameters; "
                f"budget is {DISCRIMINATOR_PARAM_BUDGET} (reduce widths)")

    def named_parameters(self, prefix="disc"):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.w{i}"] = w
            out[f"{prefix}.b{i}"] = b
        out[f"{prefix}.w_out"] = self.w_out
        out[f"{prefix}.b_out"] = self.b_out
        return out

    def parameter_count(self):
        return sum(p.size for p in self.named_parameters().values())

    def _hidden_passes(self, x):
        acts, pre = [], []
        h = x
        for w, b in zip(self.weights, self.biases):
            z = matmul(h, w) + b
            pre.append(z)
            h = leaky_relu(z, 0.2)
            acts.append(h)
        return pre, acts

    def __call__(self, x):
        """x: (batch, input_dim) -> (batch,) logits."""
        _, acts = self._hidden_passes(x)
        return matmul(acts[-1], self.w_out) + self.b_out

    def input_gradient(self, x):
        """d logits / d x as a graph expression (for the R1 penalty).

        Leaky-ReLU derivative masks are piecewise constant, so treating them
        as constants keeps the expression exact almost everywhere while its
        own parameter gradients remain available.
        """
        pre, _ = self._hidden_passes(x)
        masks = [Tensor(np.where(z.data >= 0, 1.0, 0.2), dtype=x.dtype) for z in pre]
        g = masks[-1] * self.w_out
        for w, mask in zip(reversed(self.weights[1:]), reversed(masks[:-1])):
            g = matmul(g, w.T) * mask
        return matmul(g, self.weights[0].T)


# -- optimizer ------------------------------------------------------------------------


class Adam:
    """Adam with the zero-momentum first moment the GAN lineage uses."""

    def __init__(self, params, lr=2.5e-3, beta1=0.0, beta2=0.99, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros(p.shape, dtype=p.dtype) for k, p in self.params.items()}
        self.v = {k: np.zeros(p.shape, dtype=p.dtype) for k, p in self.params.items()}

    def step(self):
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1**t)
            v_hat = self.v[name] / (1 - self.beta2**t)
            p.assign(p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self, prefix):
        out = {}
        for name in self.params:
            out[f"{prefix}.m.{name}"] = self.m[name]
            out[f"{prefix}.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, prefix, arrays, step_count):
        for name in self.params:
            self.m[name] = arrays[f"{prefix}.m.{name}"].astype(self.m[name].dtype)
            self.v[name] = arrays[f"{prefix}.v.{name}"].astype(self.v[name].dtype)
        self.step_count = step_count


# -- trainer ---------------------------------------------------------------------------


@dataclass
class ToyTrainConfig:
    generator: GeneratorConfig = field(
        default_factory=lambda: GeneratorConfig(8, (1,), (32,), z_dim=64, w_dim=64))
    seed: int = 0
    batch: int = 16
    lr_g: float = 2.5e-3
    lr_d: float = 2.5e-3
    beta1: float = 0.0
    beta2: float = 0.99
    r1_gamma: float = 0.0
    disc_widths: tuple = (128, 64)
    noise_std: float = 0.05


class NonFiniteLoss(RuntimeError):
    pass


class ToyTrainer:
    def __init__(self, config=None, dtype=np.float64):
        self.config = config or ToyTrainConfig()
        self.dtype = np.dtype(dtype)
        cfg = self.config
        self.generator = build(cfg.generator, seed=cfg.seed, dtype=dtype)
        res = cfg.generator.target_resolution
        self.dataset = ToyDataset(res, cfg.generator.rgb_channels, cfg.noise_std, seed=cfg.seed)
        self.discriminator = ToyDiscriminator(
            res * res * cfg.generator.rgb_channels, cfg.disc_widths,
            RngStream(cfg.seed, ("disc",)), dtype=dtype)
        self.g_params = self.generator.named_parameters()
        self.d_params = self.discriminator.named_parameters()
        self.opt_g = Adam(self.g_params, lr=cfg.lr_g, beta1=cfg.beta1, beta2=cfg.beta2)
        self.opt_d = Adam(self.d_params, lr=cfg.lr_d, beta1=cfg.beta1, beta2=cfg.beta2)
        self.step_count = 0
        self.loss_history = []  # (d_loss, g_loss) per step

    # -- per-step determinism --------------------------------------------------------

    def _latents(self, step, phase, count):
        stream = RngStream(self.config.seed, ("latent", phase, step))
        return [Tensor(stream.normal((self.config.generator.z_dim,)), dtype=self.dtype)
                for _ in range(count)]

    def _noise(self, step, phase):
        return NoiseSpec("random", seed=RngStream(self.config.seed, ("noise-seed", phase, step)).integers(0, 2**31).item())

    def _generate_batch(self, step, phase):
        zs = self._latents(step, phase, self.config.batch)
        noise = self._noise(step, phase)
        images = [self.generator.synthesize(z, noise=noise) for z in zs]
        from .substrate.tensor import concat, reshape
        flat = [reshape(img, (1, -1)) for img in images]
        return concat(flat, axis=0)

    # -- steps ------------------------------------------------------------------------

    def train_step(self):
        """One discriminator update, then one generator update."""
        cfg = self.config
        step = self.step_count
        real = Tensor(self.dataset.sample(cfg.batch, step=step).reshape(cfg.batch, -1),
                      dtype=self.dtype)

        fake = self._generate_batch(step, "d").detach()
        d_fake = self.discriminator(fake)
        d_real = self.discriminator(real)
        loss_d = tmean(softplus(d_fake)) + tmean(softplus(-d_real))
        if cfg.r1_gamma > 0:
            grads = self.discriminator.input_gradient(real)
            loss_d = loss_d + (cfg.r1_gamma / 2.0) * tmean(grads.square().sum(axis=1))
        self.opt_d.zero_grad()
        self.opt_g.zero_grad()
        loss_d_val = loss_d.item()
        loss_d.backward()
        self.opt_d.step()

        fake_g = self._generate_batch(step, "g")
        loss_g = tmean(softplus(-self.discriminator(fake_g)))
        self.opt_d.zero_grad()
        self.opt_g.zero_grad()
        loss_g_val = loss_g.item()
        loss_g.backward()
        self.opt_g.step()
        self.opt_d.zero_grad()
        self.opt_g.zero_grad()

        if not (np.isfinite(loss_d_val) and np.isfinite(loss_g_val)):
            raise NonFiniteLoss(
                f"non-finite loss at step {step}: d={loss_d_val}, g={loss_g_val}")
        self.step_count += 1
        self.loss_history.append((loss_d_val, loss_g_val))
        return {"step": self.step_count, "loss_d": loss_d_val, "loss_g": loss_g_val}

    def train(self, steps, log_every=0):
        last = None
        for _ in range(steps):
            last = self.train_step()
            if log_every and last["step"] % log_every == 0:
                print(f"step {last['step']:6d}  d {last['loss_d']:.4f}  g {last['loss_g']:.4f}")
        return last

    # -- evaluation ----------------------------------------------------------------------

    def sample_images(self, count, seed_label="eval"):
        stream = RngStream(self.config.seed, (seed_label, self.step_count))
        imgs = []
        for _ in range(count):
            z = Tensor(stream.normal((self.config.generator.z_dim,)), dtype=self.dtype)
            imgs.append(self.generator.synthesize(z).numpy())
        return np.stack(imgs)

    def moment_distance(self, count=256):
        return moment_metrics(self.sample_images(count), self.dataset)

    # -- checkpointing ----------------------------------------------------------------------

    def _all_arrays(self):
        arrays = {f"g.{k}": p.data for k, p in self.g_params.items()}
        arrays.update({f"d.{k}": p.data for k, p in self.d_params.items()})
        arrays.update(self.opt_g.state_arrays("opt_g"))
        arrays.update(self.opt_d.state_arrays("opt_d"))
        arrays["loss_history"] = np.asarray(self.loss_history, dtype=np.float64).reshape(-1, 2)
        return arrays

    def save_checkpoint(self, path):
        arrays = self._all_arrays()
        names = sorted(arrays)
        blobs = [np.asarray(arrays[n]) for n in names]  # keep 0-d shapes intact
        header = {
            "version": CHECKPOINT_VERSION,
            "step": self.step_count,
            "opt_steps": [self.opt_d.step_count, self.opt_g.step_count],
            "names": names,
            "shapes": [list(b.shape) for b in blobs],
            "dtypes": [str(b.dtype) for b in blobs],
        }
        head = json.dumps(header).encode("utf-8")
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(head)))
            f.write(head)
            for b in blobs:
                f.write(b.astype(b.dtype.newbyteorder("<")).tobytes())

    def load_checkpoint(self, path):
        with open(path, "rb") as f:
            if f.read(4) != CHECKPOINT_MAGIC:
                raise ValueError(f"{path}: not a checkpoint")
            version, hlen = struct.unpack("<IQ", f.read(12))
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {version}")
            header = json.loads(f.read(hlen).decode("utf-8"))
            arrays = {}
            for name, shape, dt in zip(header["names"], header["shapes"], header["dtypes"]):
                n = int(np.prod(shape)) if shape else 1
                buf = f.read(n * np.dtype(dt).itemsize)
                arrays[name] = np.frombuffer(buf, dtype=np.dtype(dt).newbyteorder("<")).reshape(shape).copy()
        for k, p in self.g_params.items():
            p.assign(arrays[f"g.{k}"])
        for k, p in self.d_params.items():
            p.assign(arrays[f"d.{k}"])
        d_steps, g_steps = header["opt_steps"]
        self.opt_g.load_state_arrays("opt_g", arrays, g_steps)
        self.opt_d.load_state_arrays("opt_d", arrays, d_steps)
        self.step_count = header["step"]
        self.loss_history = [tuple(row) for row in arrays["loss_history"]]
        return self

"""
Pooling noisy feature maps
==========================

Adds Gaussian noise (variance 0.01) to an image, runs it through the first
convolution of a network trained on CIFAR-10 and measures how close each
pooled map stays to the un-pooled conv output. Training the small network
takes about half a minute; data are expected under
``$FUZZYPOOL_DATA/cifar-10-batches-bin``.
"""

from skimage import data as samples

from fuzzypool import PoolWindowSpec
from fuzzypool.data import downscale, load_cifar10_dir
from fuzzypool.experiments import featuremap_experiment
from fuzzypool.nn import build_lenet, train

train_set = load_cifar10_dir(train=True).subset(5000)
test_set = load_cifar10_dir(train=False).subset(1000)
network = train(build_lenet("max", (3, 32, 32), epochs=1, seed=0), train_set, test_set).network

# %%
# The reference is the conv output sampled at the top-left of every window,
# so each operator is scored on how well it summarises its window.
image = downscale(samples.camera().astype(float), 256)
dump = featuremap_experiment(network, image, variance=0.01, seed=0, spec=PoolWindowSpec.square(2, 2))
print(f"noisy input PSNR: {dump.input_psnr:.2f} dB")
for op, value in dump.psnr_db.items():
    per_channel = " ".join(f"{v:.1f}" for v in dump.channel_psnr[op])
    print(f"{op:>5}: {value:.2f} dB  (channels: {per_channel})")

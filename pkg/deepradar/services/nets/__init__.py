"""
Radar model networks: scene encoder, direct Normal/GMM heads, conditional
VAE and discriminator.
"""
from deepradar.services.nets.direct import (
    GmmGridParams,
    NormalGridParams,
    gmm_nll,
    gmm_sample,
    normal_nll,
    normal_sample,
)
from deepradar.services.nets.radar_model import (
    GmmModel,
    ModelCheckpoint,
    NormalModel,
    RadarModel,
    TrainingMetadata,
    VaeModel,
    build_model,
    load_model,
    save_model,
)
from deepradar.services.nets.vae import LatentGaussian, reparameterize

#pragma once

#include "shint/error.hpp"
#include "shint/fft.hpp"
#include "shint/grad.hpp"
#include "shint/gradcheck.hpp"
#include "shint/hefilter.hpp"
#include "shint/imageio.hpp"
#include "shint/maskgen.hpp"
#include "shint/random.hpp"
#include "shint/reference.hpp"
#include "shint/sht_io.hpp"
#include "shint/shu.hpp"
#include "shint/spectral_split.hpp"
#include "shint/tensor.hpp"

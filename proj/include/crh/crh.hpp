#ifndef CRH_CRH_HPP
#define CRH_CRH_HPP

#include "crh/codebook.hpp"
#include "crh/common.hpp"
#include "crh/csa.hpp"
#include "crh/encoder.hpp"
#include "crh/evaluation.hpp"
#include "crh/feature_space.hpp"
#include "crh/gradcheck.hpp"
#include "crh/hamming.hpp"
#include "crh/losses.hpp"
#include "crh/pseudo_labels.hpp"
#include "crh/synthdata.hpp"
#include "crh/trainer.hpp"

#endif  // CRH_CRH_HPP

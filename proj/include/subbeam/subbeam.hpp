#pragma once

#include "subbeam/array.hpp"
#include "subbeam/dft.hpp"
#include "subbeam/optimizer.hpp"
#include "subbeam/codebook_io.hpp"
#include "subbeam/waveform.hpp"
#include "subbeam/iq_io.hpp"
#include "subbeam/channel.hpp"
#include "subbeam/scene_io.hpp"
#include "subbeam/sensing.hpp"
#include "subbeam/apps/isac.hpp"
#include "subbeam/apps/imaging.hpp"
#include "subbeam/apps/localization.hpp"
#include "subbeam/apps/mobility.hpp"
#include "subbeam/apps/baselines.hpp"
#include "subbeam/apps/tradeoff.hpp"

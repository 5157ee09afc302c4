# bosotop